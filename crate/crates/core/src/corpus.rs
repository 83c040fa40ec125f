//! Annotated traffic-panel corpus: manifest loading and saving, validation
//! against the image files, summary statistics and filtering.
//!
//! The manifest is a single JSON document with a `records` array. Image paths
//! are relative to the directory holding the manifest.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::BBox;
use crate::par::{self, Execution};
use crate::recognizer::script::ScriptTag;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Malformed(String),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {id:?} has category {value}, expected 1-4")]
    InvalidCategory { id: String, value: i64 },
    #[error("record {0:?} lists no languages")]
    NoLanguages(String),
}

/// Panel taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    /// Destination name and distance.
    DestinationDistance = 1,
    /// Location name and the direction of an arrow symbol.
    LocationDirection = 2,
    /// Name of the place where the panel stands.
    PlaceName = 3,
    /// Caution text such as "drive slow".
    Caution = 4,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::DestinationDistance,
        Category::LocationDirection,
        Category::PlaceName,
        Category::Caution,
    ];

    pub fn from_number(n: i64) -> Option<Category> {
        match n {
            1 => Some(Category::DestinationDistance),
            2 => Some(Category::LocationDirection),
            3 => Some(Category::PlaceName),
            4 => Some(Category::Caution),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = i64::deserialize(d)?;
        Category::from_number(n)
            .ok_or_else(|| serde::de::Error::custom(format!("category {n} outside 1-4")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[serde(alias = "Assamese", alias = "as")]
    Assamese,
    #[serde(alias = "Hindi", alias = "hi")]
    Hindi,
    #[serde(alias = "English", alias = "en")]
    English,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::Assamese, Language::Hindi, Language::English];

    /// Short tag passed to external engines.
    pub fn code(self) -> &'static str {
        match self {
            Language::Assamese => "as",
            Language::Hindi => "hi",
            Language::English => "en",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::Assamese => "assamese",
            Language::Hindi => "hindi",
            Language::English => "english",
        }
    }

    /// Accepts names (any case) and short codes.
    pub fn parse(s: &str) -> Option<Language> {
        match s.trim().to_ascii_lowercase().as_str() {
            "assamese" | "as" | "asm" => Some(Language::Assamese),
            "hindi" | "hi" | "hin" => Some(Language::Hindi),
            "english" | "en" | "eng" => Some(Language::English),
            _ => None,
        }
    }

    /// The script a language is written in on the panels.
    pub fn script(self) -> ScriptTag {
        match self {
            Language::Assamese => ScriptTag::BengaliAssamese,
            Language::Hindi => ScriptTag::Devanagari,
            Language::English => ScriptTag::Latin,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the panel image was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    VideoFrame,
    Photograph,
    Online,
}

/// Arrow direction on a category-2 panel. Always annotated, never read from
/// pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Straight,
    Unknown,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Direction> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            "straight" => Some(Direction::Straight),
            "unknown" => Some(Direction::Unknown),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Straight => "straight",
            Direction::Unknown => "unknown",
        }
    }
}

/// One annotated text line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRegion {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub transcript: String,
    pub script: ScriptTag,
    #[serde(rename = "order")]
    pub reading_order: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub id: String,
    #[serde(rename = "image")]
    pub image_path: PathBuf,
    pub category: Category,
    pub languages: BTreeSet<Language>,
    pub source: Source,
    #[serde(rename = "note", default, skip_serializing_if = "Option::is_none")]
    pub capture_note: Option<String>,
    #[serde(default)]
    pub regions: Vec<GroundTruthRegion>,
}

impl PanelRecord {
    /// Regions sorted by reading order.
    pub fn ordered_regions(&self) -> Vec<&GroundTruthRegion> {
        let mut regions: Vec<_> = self.regions.iter().collect();
        regions.sort_by_key(|r| r.reading_order);
        regions
    }

    /// Ground-truth transcripts joined in reading order.
    pub fn transcript(&self) -> String {
        self.ordered_regions()
            .iter()
            .map(|r| r.transcript.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// First annotated direction that is not `unknown`.
    pub fn direction(&self) -> Option<Direction> {
        self.ordered_regions()
            .iter()
            .filter_map(|r| r.direction)
            .find(|d| *d != Direction::Unknown)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub records: Vec<PanelRecord>,
}

impl Corpus {
    pub fn new(records: Vec<PanelRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PanelRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// A parsed manifest plus the keys it ignored.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub corpus: Corpus,
    pub warnings: Vec<String>,
    /// Directory the image paths are relative to.
    pub image_root: PathBuf,
}

const RECORD_KEYS: &[&str] = &["id", "image", "category", "languages", "source", "note", "regions"];
const REGION_KEYS: &[&str] = &["box", "transcript", "script", "order", "direction"];

fn unknown_keys(value: &Value, known: &[&str], at: &str, warnings: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for key in map.keys().filter(|k| !known.contains(&k.as_str())) {
            warnings.push(format!("{at}: ignored unknown field {key:?}"));
        }
    }
}

/// Parse manifest JSON text. Records keep file order.
pub fn parse_manifest(text: &str) -> Result<(Corpus, Vec<String>), CorpusError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CorpusError::Malformed(e.to_string()))?;
    let mut warnings = Vec::new();
    unknown_keys(&doc, &["records"], "manifest", &mut warnings);
    let raw_records = doc
        .get("records")
        .and_then(Value::as_array)
        .ok_or_else(|| CorpusError::Malformed("missing `records` array".into()))?;

    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(raw_records.len());
    for (i, raw) in raw_records.iter().enumerate() {
        let id = raw
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| CorpusError::Malformed(format!("records[{i}] has no string `id`")))?
            .to_string();
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        let category = raw
            .get("category")
            .and_then(Value::as_i64)
            .ok_or_else(|| CorpusError::Malformed(format!("record {id:?} has no integer `category`")))?;
        if Category::from_number(category).is_none() {
            return Err(CorpusError::InvalidCategory { id, value: category });
        }
        unknown_keys(raw, RECORD_KEYS, &format!("records[{i}] ({id})"), &mut warnings);
        if let Some(regions) = raw.get("regions").and_then(Value::as_array) {
            for (j, region) in regions.iter().enumerate() {
                unknown_keys(region, REGION_KEYS, &format!("records[{i}].regions[{j}]"), &mut warnings);
            }
        }
        let record: PanelRecord = serde_json::from_value(raw.clone())
            .map_err(|e| CorpusError::Malformed(format!("record {id:?}: {e}")))?;
        if record.languages.is_empty() {
            return Err(CorpusError::NoLanguages(id));
        }
        records.push(record);
    }
    Ok((Corpus::new(records), warnings))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<LoadedManifest, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let (corpus, warnings) = parse_manifest(&text)?;
    for w in &warnings {
        log::warn!("{}: {w}", path.display());
    }
    let image_root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedManifest { corpus, warnings, image_root })
}

pub fn manifest_json(corpus: &Corpus) -> String {
    serde_json::to_string_pretty(corpus).expect("corpus serializes")
}

pub fn save_manifest(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, manifest_json(corpus) + "\n")
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    MissingImage,
    UnreadableImage,
    BoxOutOfBounds,
    DegenerateBox,
    DuplicateReadingOrder,
    EmptyTranscript,
    NoRegions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub record_id: String,
    pub kind: FindingKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }
}

fn validate_record(record: &PanelRecord, image_root: &Path) -> Vec<Finding> {
    let mut findings = Vec::new();
    let mut push = |kind, detail: String| {
        findings.push(Finding { record_id: record.id.clone(), kind, detail });
    };

    let path = image_root.join(&record.image_path);
    let dims = if !path.is_file() {
        push(FindingKind::MissingImage, format!("missing image {}", path.display()));
        None
    } else {
        match image::image_dimensions(&path) {
            Ok(d) => Some(d),
            Err(e) => {
                push(FindingKind::UnreadableImage, format!("cannot read {}: {e}", path.display()));
                None
            }
        }
    };

    if record.regions.is_empty() && record.capture_note.as_deref().map_or(true, |n| n.trim().is_empty()) {
        push(FindingKind::NoRegions, "no regions and no note explaining why".into());
    }

    let mut orders = HashSet::new();
    for region in &record.regions {
        let order = region.reading_order;
        if region.bbox.is_empty() {
            push(FindingKind::DegenerateBox, format!("region {order}: box {:?} has zero size", region.bbox));
        }
        if let Some((w, h)) = dims {
            if !region.bbox.fits_within(w, h) {
                push(
                    FindingKind::BoxOutOfBounds,
                    format!("region {order}: box out of bounds {:?} for {w}x{h} image", region.bbox),
                );
            }
        }
        if !orders.insert(order) {
            push(FindingKind::DuplicateReadingOrder, format!("reading order {order} used twice"));
        }
        if region.transcript.trim().is_empty() {
            push(FindingKind::EmptyTranscript, format!("region {order}: empty transcript"));
        }
    }
    findings
}

/// Check every record against its image file. Findings are data: this never
/// fails.
pub fn validate_corpus(corpus: &Corpus, image_root: impl AsRef<Path>) -> ValidationReport {
    let root = image_root.as_ref();
    let findings: Vec<Finding> = par::map(Execution::Parallel, &corpus.records, |r| validate_record(r, root))
        .into_iter()
        .flatten()
        .collect();
    ValidationReport { ok: findings.is_empty(), findings }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub per_category: BTreeMap<u8, usize>,
    pub per_language: BTreeMap<Language, usize>,
    pub per_source: BTreeMap<Source, usize>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats { total: corpus.len(), ..CorpusStats::default() };
    for r in &corpus.records {
        *stats.per_category.entry(r.category.number()).or_default() += 1;
        *stats.per_source.entry(r.source).or_default() += 1;
        for lang in &r.languages {
            *stats.per_language.entry(*lang).or_default() += 1;
        }
    }
    stats
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22}{:>6}", "total", self.total)?;
        for (c, n) in &self.per_category {
            writeln!(f, "{:<22}{:>6}", format!("category {c}"), n)?;
        }
        for (l, n) in &self.per_language {
            writeln!(f, "{:<22}{:>6}", format!("language {l}"), n)?;
        }
        for (s, n) in &self.per_source {
            let name = serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            writeln!(f, "{:<22}{:>6}", format!("source {name}"), n)?;
        }
        Ok(())
    }
}

/// Conjunctive record filter; `None` fields match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordFilter {
    pub category: Option<Category>,
    pub language: Option<Language>,
    pub source: Option<Source>,
}

impl RecordFilter {
    pub fn matches(&self, r: &PanelRecord) -> bool {
        self.category.map_or(true, |c| r.category == c)
            && self.language.map_or(true, |l| r.languages.contains(&l))
            && self.source.map_or(true, |s| r.source == s)
    }
}

/// Order-preserving subset.
pub fn filter_corpus(corpus: &Corpus, predicate: impl Fn(&PanelRecord) -> bool) -> Corpus {
    Corpus::new(corpus.records.iter().filter(|r| predicate(r)).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, category: i64) -> Value {
        serde_json::json!({
            "id": id,
            "image": format!("{id}.png"),
            "category": category,
            "languages": ["english"],
            "source": "photograph",
            "regions": [{"box": [1, 1, 4, 4], "transcript": "X", "script": "latin", "order": 0}]
        })
    }

    fn manifest(records: Vec<Value>) -> String {
        serde_json::json!({ "records": records }).to_string()
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = manifest(vec![record("p01", 1), record("p01", 2)]);
        assert!(matches!(parse_manifest(&text), Err(CorpusError::DuplicateId(id)) if id == "p01"));
    }

    #[test]
    fn category_out_of_range_rejected() {
        let text = manifest(vec![record("p01", 5)]);
        assert!(matches!(
            parse_manifest(&text),
            Err(CorpusError::InvalidCategory { value: 5, .. })
        ));
    }

    #[test]
    fn unknown_fields_warn() {
        let mut r = record("p01", 3);
        r["weather"] = "rain".into();
        r["regions"][0]["font"] = "serif".into();
        let (corpus, warnings) = parse_manifest(&manifest(vec![r])).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(warnings.len(), 2);
        assert!(warnings[0].contains("weather"));
    }

    #[test]
    fn malformed_json() {
        assert!(matches!(parse_manifest("{not json"), Err(CorpusError::Malformed(_))));
        assert!(matches!(parse_manifest("{}"), Err(CorpusError::Malformed(_))));
    }

    #[test]
    fn round_trip() {
        let mut r = record("p02", 2);
        r["regions"][0]["direction"] = "left".into();
        r["note"] = "dusk".into();
        let (corpus, _) = parse_manifest(&manifest(vec![record("p01", 1), r])).unwrap();
        let (again, warnings) = parse_manifest(&manifest_json(&corpus)).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(again, corpus);
    }

    #[test]
    fn stats_and_filter() {
        let (corpus, _) = parse_manifest(&manifest(vec![record("a", 1), record("b", 4), record("c", 4)])).unwrap();
        let stats = corpus_stats(&corpus);
        assert_eq!(stats.total, 3);
        assert_eq!(stats.per_category.get(&4), Some(&2));
        assert_eq!(stats.per_category.values().sum::<usize>(), 3);

        let cat4 = RecordFilter { category: Some(Category::Caution), ..Default::default() };
        let sub = filter_corpus(&corpus, |r| cat4.matches(r));
        assert_eq!(sub.records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["b", "c"]);
        assert!(filter_corpus(&corpus, |_| false).is_empty());

        let empty = corpus_stats(&Corpus::default());
        assert_eq!(empty.total, 0);
        assert!(empty.per_category.is_empty() && empty.per_language.is_empty() && empty.per_source.is_empty());
    }

    #[test]
    fn validation_findings() {
        let dir = tempfile::tempdir().unwrap();
        crate::raster::RasterImage::filled(10, 10, &[0]).unwrap().save(dir.path().join("p01.png")).unwrap();
        let mut oob = record("p01", 1);
        oob["regions"][0]["box"] = serde_json::json!([3, 0, 12, 4]);
        oob["regions"] = serde_json::json!([oob["regions"][0].clone(), {"box": [0,0,2,2], "transcript": " ", "script": "latin", "order": 0}]);
        let (corpus, _) = parse_manifest(&manifest(vec![oob, record("gone", 3)])).unwrap();

        let report = validate_corpus(&corpus, dir.path());
        assert!(!report.ok);
        assert_eq!(report.count(FindingKind::BoxOutOfBounds), 1);
        assert_eq!(report.count(FindingKind::DuplicateReadingOrder), 1);
        assert_eq!(report.count(FindingKind::EmptyTranscript), 1);
        assert_eq!(report.count(FindingKind::MissingImage), 1);
        assert_eq!(report.findings.len(), 4);
        assert_eq!(validate_corpus(&corpus, dir.path()), report);
    }
}
