//! Region images to text: pluggable OCR backends, the builtin template
//! recognizer, script identification and text normalization.

pub mod atlas;
pub mod external;
pub mod normalize;
pub mod script;
pub mod template;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Category;
use crate::raster::{RasterError, RasterImage};

pub use atlas::{AtlasError, GlyphAtlas};
pub use external::{HttpBackend, ProcessBackend};
pub use normalize::normalize_text;
pub use script::{identify_script, ScriptTag};
pub use template::{template_recognize, TemplateParams};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum OcrError {
    #[error("backend {backend} unavailable: {reason}")]
    BackendUnavailable { backend: String, reason: String },
    #[error("backend {backend} timed out after {after:?}")]
    Timeout { backend: String, after: Duration },
    #[error("backend {backend} returned an invalid response: {reason}")]
    Protocol { backend: String, reason: String },
    #[error("region image is empty")]
    EmptyRegion,
    #[error("cannot load atlas {path}: {reason}")]
    Atlas { path: PathBuf, reason: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl OcrError {
    /// Whether the backend as a whole cannot be used, as opposed to a single
    /// call failing.
    pub fn is_unavailable(&self) -> bool {
        matches!(self, OcrError::BackendUnavailable { .. } | OcrError::Atlas { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizedLine {
    pub text: String,
    pub script: ScriptTag,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizedText {
    /// Ordered by the source region's line index.
    pub lines: Vec<RecognizedLine>,
    pub backend_id: String,
    pub elapsed_s: f64,
}

impl RecognizedText {
    pub fn empty(backend_id: &str) -> Self {
        Self { lines: Vec::new(), backend_id: backend_id.to_string(), elapsed_s: 0.0 }
    }

    /// Split engine output into lines, dropping blank ones. Engines that
    /// report no per-line confidence get 1.0.
    pub fn from_plain(backend_id: &str, output: &str, elapsed: Duration) -> Self {
        let lines = output
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| RecognizedLine { text: l.to_string(), script: identify_script(l), confidence: 1.0 })
            .collect();
        Self { lines, backend_id: backend_id.to_string(), elapsed_s: elapsed.as_secs_f64() }
    }

    /// All lines joined by single spaces.
    pub fn joined(&self) -> String {
        self.lines.iter().map(|l| l.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn is_blank(&self) -> bool {
        self.lines.iter().all(|l| l.text.trim().is_empty())
    }

    /// Append another result's lines, accumulating elapsed time.
    pub fn extend(&mut self, other: RecognizedText) {
        self.lines.extend(other.lines);
        self.elapsed_s += other.elapsed_s;
    }
}

/// What the caller knows about a region before recognition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecognitionHints {
    /// Expected scripts; empty means unknown.
    pub scripts: Vec<ScriptTag>,
    pub category: Option<Category>,
}

impl RecognitionHints {
    /// Language tags for external engines, e.g. `as+hi+en`.
    pub fn lang_tags(&self) -> String {
        let mut tags: Vec<&str> = self
            .scripts
            .iter()
            .flat_map(|s| match s {
                ScriptTag::BengaliAssamese => vec!["as"],
                ScriptTag::Devanagari => vec!["hi"],
                ScriptTag::Latin => vec!["en"],
                ScriptTag::Mixed => vec!["as", "hi", "en"],
            })
            .collect();
        if tags.is_empty() {
            tags = vec!["as", "hi", "en"];
        }
        let mut seen = Vec::new();
        tags.retain(|t| {
            let fresh = !seen.contains(t);
            seen.push(*t);
            fresh
        });
        tags.join("+")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    BuiltinTemplate,
    ExternalProcess,
    HttpService,
}

/// An OCR engine. Implementations must be shareable across threads; external
/// engines serialize their own invocations.
pub trait OcrBackend: Send + Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> BackendKind;
    fn recognize(&self, region: &RasterImage, hints: &RecognitionHints) -> Result<RecognizedText, OcrError>;
}

/// Builtin recognizer: binarize, then match glyph templates.
#[derive(Debug, Clone)]
pub struct TemplateBackend {
    id: String,
    atlas: Arc<GlyphAtlas>,
    params: TemplateParams,
}

impl TemplateBackend {
    pub fn new(id: impl Into<String>, atlas: Arc<GlyphAtlas>) -> Self {
        Self { id: id.into(), atlas, params: TemplateParams::default() }
    }

    /// Backed by the bundled atlas.
    pub fn builtin() -> Self {
        Self::new("builtin", Arc::new(GlyphAtlas::builtin().clone()))
    }

    pub fn with_params(mut self, params: TemplateParams) -> Self {
        self.params = params;
        self
    }

    pub fn atlas(&self) -> &GlyphAtlas {
        &self.atlas
    }
}

impl OcrBackend for TemplateBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::BuiltinTemplate
    }

    fn recognize(&self, region: &RasterImage, hints: &RecognitionHints) -> Result<RecognizedText, OcrError> {
        let started = Instant::now();
        let mask = template::binarize_region(region);
        let mut out = template::template_recognize_with(&self.atlas, &mask, &hints.scripts, self.params);
        out.backend_id = self.id.clone();
        out.elapsed_s = started.elapsed().as_secs_f64();
        Ok(out)
    }
}

fn default_timeout_s() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

fn default_key_header() -> String {
    "apikey".to_string()
}

/// Backend description as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OcrBackendSpec {
    Builtin {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        atlas: Option<PathBuf>,
    },
    Process {
        command: PathBuf,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        args: Vec<String>,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
    },
    Http {
        endpoint: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key: Option<String>,
        #[serde(default = "default_key_header")]
        api_key_header: String,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
    },
}

impl Default for OcrBackendSpec {
    fn default() -> Self {
        OcrBackendSpec::Builtin { atlas: None }
    }
}

impl OcrBackendSpec {
    pub fn build(&self, id: &str) -> Result<Box<dyn OcrBackend>, OcrError> {
        Ok(match self {
            OcrBackendSpec::Builtin { atlas: None } => {
                Box::new(TemplateBackend::new(id, Arc::new(GlyphAtlas::builtin().clone())))
            }
            OcrBackendSpec::Builtin { atlas: Some(path) } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| OcrError::Atlas { path: path.clone(), reason: e.to_string() })?;
                let atlas = GlyphAtlas::parse(&text)
                    .map_err(|e| OcrError::Atlas { path: path.clone(), reason: e.to_string() })?;
                Box::new(TemplateBackend::new(id, Arc::new(atlas)))
            }
            OcrBackendSpec::Process { command, args, timeout_s } => Box::new(
                ProcessBackend::new(id, command.clone())
                    .with_args(args.clone())
                    .with_timeout(Duration::from_secs_f64(timeout_s.max(0.0))),
            ),
            OcrBackendSpec::Http { endpoint, api_key, api_key_header, timeout_s } => Box::new(HttpBackend::new(
                id,
                endpoint.clone(),
                api_key.clone().map(|k| (api_key_header.clone(), k)),
                Duration::from_secs_f64(timeout_s.max(0.0)),
            )?),
        })
    }
}

/// A named backend entry, as listed in benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEntry {
    pub id: String,
    #[serde(flatten)]
    pub spec: OcrBackendSpec,
}

/// Run `backend`, refusing empty regions up front.
pub fn recognize(
    backend: &dyn OcrBackend,
    region: &RasterImage,
    hints: &RecognitionHints,
) -> Result<RecognizedText, OcrError> {
    if region.width() == 0 || region.height() == 0 {
        return Err(OcrError::EmptyRegion);
    }
    backend.recognize(region, hints)
}
