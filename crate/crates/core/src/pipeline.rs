//! The three stages end to end: detect text lines, recognize them, compose
//! and speak the message, then check it finishes before the panel is passed.
//!
//! Stage failures never abort a run. They are recorded in
//! [`PipelineResult::failures`] next to whatever earlier stages produced.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::{dominant_language, ComposeError, Composer, PanelMessage, Utterance};
use crate::corpus::{Direction, Language};
use crate::detector::{detect_text_regions, DetectorConfig, TextRegion};
use crate::raster::{RasterError, RasterImage};
use crate::recognizer::normalize::normalize_text;
use crate::recognizer::{recognize, OcrBackend, OcrBackendSpec, OcrError, RecognitionHints, RecognizedText};
use crate::speech::{
    check_feasibility, synthesize, write_wav, AudioClip, Feasibility, SpeechError, TimingBudget, TtsBackend,
    TtsBackendSpec, Voice, DEFAULT_RATE_WPM,
};

pub const CONFIG_ENV: &str = "PANELVOICE_CONFIG";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Decode(#[from] RasterError),
    #[error(transparent)]
    Backend(#[from] OcrError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub distance_m: f64,
    pub speed_mps: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { distance_m: 100.0, speed_mps: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("out") }
    }
}

/// Everything a run needs. Every field has a default, so an empty file is a
/// valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub ocr_backend: OcrBackendSpec,
    pub tts_backend: TtsBackendSpec,
    /// Spoken language; by default the dominant script of the recognized text.
    pub language: Option<Language>,
    /// Languages expected on the panels, passed to the recognizer as script
    /// hints. Empty means any.
    pub ocr_languages: Vec<Language>,
    /// Arrow direction to assume for direction panels.
    pub direction: Option<Direction>,
    pub rate_wpm: f64,
    pub timing: TimingConfig,
    /// Replacement template table.
    pub templates: Option<PathBuf>,
    /// Margin added around each region before recognition, as a fraction of
    /// the region height.
    pub region_padding: f64,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            ocr_backend: OcrBackendSpec::default(),
            tts_backend: TtsBackendSpec::default(),
            language: None,
            ocr_languages: Vec::new(),
            direction: None,
            rate_wpm: DEFAULT_RATE_WPM,
            timing: TimingConfig::default(),
            templates: None,
            region_padding: 0.25,
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parse TOML, or JSON when `path` ends in `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let fail = |reason: String| PipelineError::Config { path: path.to_path_buf(), reason };
        let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let cfg: PipelineConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| fail(e.to_string()))?
        };
        cfg.validate().map_err(|e| fail(e.to_string()))?;
        Ok(cfg)
    }

    /// `explicit`, else the file named by `PANELVOICE_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self, PipelineError> {
        match explicit {
            Some(path) => Self::load(path),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(path) if !path.is_empty() => Self::load(PathBuf::from(path)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |m: String| Err(PipelineError::Invalid(m));
        if let Err(e) = self.detector.validate() {
            return invalid(format!("detector: {e}"));
        }
        if !(self.rate_wpm > 0.0) {
            return invalid(format!("rate_wpm must be positive, got {}", self.rate_wpm));
        }
        if !(self.timing.speed_mps > 0.0) || !(self.timing.distance_m >= 0.0) {
            return invalid("timing needs speed_mps > 0 and distance_m >= 0".into());
        }
        if !(self.region_padding >= 0.0) {
            return invalid("region_padding must be non-negative".into());
        }
        if let TtsBackendSpec::Builtin { sample_rate: 0 } = self.tts_backend {
            return invalid("tts sample_rate must be positive".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detect,
    Ocr,
    Compose,
    Tts,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The stage produced nothing to pass on.
    Empty,
    Unavailable,
    Timeout,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

/// Wall-clock seconds per stage; `total_s` also covers bookkeeping between
/// stages, so it is at least their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub detect_s: f64,
    pub ocr_s: f64,
    pub compose_s: f64,
    pub tts_s: f64,
    pub total_s: f64,
}

impl StageTimings {
    pub fn processing_s(&self) -> f64 {
        self.detect_s + self.ocr_s + self.compose_s + self.tts_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub image: String,
    pub regions: Vec<TextRegion>,
    pub recognized: RecognizedText,
    pub message: Option<PanelMessage>,
    pub utterance: Option<Utterance>,
    /// Relative to the output directory; present iff speech was synthesized
    /// and written.
    pub wav_path: Option<PathBuf>,
    pub audio_s: Option<f64>,
    pub stage_timings: StageTimings,
    pub feasibility: Option<Feasibility>,
    pub failures: Vec<StageFailure>,
}

impl PipelineResult {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    /// JSON without the wall-clock fields (stage timings, recognizer elapsed
    /// time, slack), which differ between otherwise identical runs.
    pub fn stable_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("result serializes");
        let obj = v.as_object_mut().expect("object");
        obj.remove("stage_timings");
        if let Some(rec) = obj.get_mut("recognized").and_then(|r| r.as_object_mut()) {
            rec.remove("elapsed_s");
        }
        if let Some(f) = obj.get_mut("feasibility").and_then(|f| f.as_object_mut()) {
            f.remove("slack_s");
        }
        v
    }
}

/// Per-image inputs that do not come from the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub direction: Option<Direction>,
    pub languages: Vec<Language>,
}

/// In-memory outcome of one image, before anything is written.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub result: PipelineResult,
    pub crops: Vec<RasterImage>,
    pub clip: Option<AudioClip>,
}

/// Configured stages with their backends built once.
pub struct Pipeline {
    cfg: PipelineConfig,
    ocr: Box<dyn OcrBackend>,
    tts: Box<dyn TtsBackend>,
    composer: Composer,
}

fn ocr_failure(e: &OcrError) -> StageFailure {
    let kind = match e {
        OcrError::Timeout { .. } => FailureKind::Timeout,
        e if e.is_unavailable() => FailureKind::Unavailable,
        _ => FailureKind::Error,
    };
    StageFailure { stage: Stage::Ocr, kind, message: e.to_string() }
}

fn tts_failure(e: &SpeechError) -> StageFailure {
    let kind = match e {
        SpeechError::Timeout { .. } => FailureKind::Timeout,
        SpeechError::BackendUnavailable { .. } => FailureKind::Unavailable,
        SpeechError::EmptyUtterance => FailureKind::Empty,
        _ => FailureKind::Error,
    };
    StageFailure { stage: Stage::Tts, kind, message: e.to_string() }
}

fn compose_failure(e: &ComposeError) -> StageFailure {
    let kind = if *e == ComposeError::EmptyInput { FailureKind::Empty } else { FailureKind::Error };
    StageFailure { stage: Stage::Compose, kind, message: e.to_string() }
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let ocr = cfg.ocr_backend.build("ocr")?;
        let tts = cfg.tts_backend.build("tts");
        Self::with_backends(cfg, ocr, tts)
    }

    pub fn with_backends(
        cfg: PipelineConfig,
        ocr: Box<dyn OcrBackend>,
        tts: Box<dyn TtsBackend>,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let composer = match &cfg.templates {
            Some(path) => Composer::load(path).map_err(|e| PipelineError::Invalid(e.to_string()))?,
            None => Composer::builtin().clone(),
        };
        if let Some(lang) = cfg.language {
            if !composer.languages().contains(&lang) {
                return Err(PipelineError::Invalid(format!("no templates for {}", lang.name())));
            }
        }
        Ok(Self { cfg, ocr, tts, composer })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn ocr_backend(&self) -> &dyn OcrBackend {
        self.ocr.as_ref()
    }

    pub fn tts_backend(&self) -> &dyn TtsBackend {
        self.tts.as_ref()
    }

    pub fn composer(&self) -> &Composer {
        &self.composer
    }

    /// Crop each region with the configured padding and recognize it, in
    /// region order. Lines are normalized and blank ones dropped; stops at
    /// the first backend error. An empty outcome is reported as a failure.
    pub fn read_regions(
        &self,
        image: &RasterImage,
        regions: &[TextRegion],
        opts: &RunOptions,
    ) -> (RecognizedText, Vec<RasterImage>, Option<StageFailure>) {
        let languages = if opts.languages.is_empty() { &self.cfg.ocr_languages } else { &opts.languages };
        let mut scripts: Vec<_> = languages.iter().map(|l| l.script()).collect();
        scripts.dedup();
        let hints = RecognitionHints { scripts, category: None };
        let mut recognized = RecognizedText::empty(self.ocr.id());
        let mut crops = Vec::with_capacity(regions.len());
        let mut failure = None;
        for region in regions {
            let pad = (self.cfg.region_padding * f64::from(region.bbox.h)).round() as u32;
            let crop = image
                .crop(region.bbox.expand_clamped(pad, image.width(), image.height()))
                .expect("padded region lies inside the image");
            let out = recognize(self.ocr.as_ref(), &crop, &hints);
            crops.push(crop);
            match out {
                Ok(text) => recognized.extend(text),
                Err(e) => {
                    failure = Some(ocr_failure(&e));
                    break;
                }
            }
        }
        for line in &mut recognized.lines {
            line.text = normalize_text(&line.text);
        }
        recognized.lines.retain(|l| !l.text.is_empty());
        if failure.is_none() && recognized.lines.is_empty() {
            let message = if regions.is_empty() { "no text regions detected" } else { "no text recognized" };
            failure = Some(StageFailure { stage: Stage::Ocr, kind: FailureKind::Empty, message: message.into() });
        }
        (recognized, crops, failure)
    }

    /// Run every stage on a decoded image.
    pub fn process(&self, image: &RasterImage, name: &str, opts: &RunOptions) -> PipelineRun {
        let started = Instant::now();
        let mut timings = StageTimings::default();
        let mut failures = Vec::new();

        let t = Instant::now();
        let regions = detect_text_regions(image, &self.cfg.detector);
        timings.detect_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let (recognized, crops, failure) = self.read_regions(image, &regions, opts);
        failures.extend(failure);
        timings.ocr_s = t.elapsed().as_secs_f64();

        let mut message = None;
        let mut utterance = None;
        if failures.is_empty() {
            let t = Instant::now();
            let lines: Vec<String> = recognized.lines.iter().map(|l| l.text.clone()).collect();
            let language = self.cfg.language.unwrap_or_else(|| dominant_language(&recognized.joined()));
            let direction = opts.direction.or(self.cfg.direction);
            match self.composer.compose(&lines, direction, language) {
                Ok((msg, utt)) => {
                    message = Some(msg);
                    utterance = Some(utt);
                }
                Err(e) => failures.push(compose_failure(&e)),
            }
            timings.compose_s = t.elapsed().as_secs_f64();
        }

        let mut clip = None;
        if let Some(utt) = &utterance {
            let t = Instant::now();
            let voice = Voice { language: utt.language, rate_wpm: self.cfg.rate_wpm };
            match synthesize(self.tts.as_ref(), utt, &voice) {
                Ok(c) => clip = Some(c),
                Err(e) => failures.push(tts_failure(&e)),
            }
            timings.tts_s = t.elapsed().as_secs_f64();
        }

        let audio_s = clip.as_ref().map(AudioClip::duration_s);
        let feasibility = audio_s.map(|speech_s| {
            let budget = TimingBudget {
                distance_m: self.cfg.timing.distance_m,
                speed_mps: self.cfg.timing.speed_mps,
                processing_s: timings.processing_s(),
                speech_s,
            };
            check_feasibility(&budget).expect("validated speed is positive")
        });
        timings.total_s = started.elapsed().as_secs_f64().max(timings.processing_s());

        let result = PipelineResult {
            image: name.to_string(),
            regions,
            recognized,
            message,
            utterance,
            wav_path: None,
            audio_s,
            stage_timings: timings,
            feasibility,
            failures,
        };
        PipelineRun { result, crops, clip }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Write a run under `out_dir`: `regions/<stem>-<n>.png`,
/// `text/<stem>.txt`, `audio/<stem>.wav` and `report.json`. Write errors
/// become an output-stage failure in the result.
pub fn write_outputs(run: &mut PipelineRun, out_dir: &Path, stem: &str) {
    if let Err(e) = try_write_outputs(run, out_dir, stem) {
        run.result.failures.push(StageFailure { stage: Stage::Output, kind: FailureKind::Error, message: e.to_string() });
    }
    let report = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(&run.result).expect("result serializes");
    if let Err(e) = fs::write(&report, json + "\n") {
        log::error!("{}: {e}", report.display());
    }
}

fn try_write_outputs(run: &mut PipelineRun, out_dir: &Path, stem: &str) -> Result<(), PipelineError> {
    for sub in ["regions", "text", "audio"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    for (i, crop) in run.crops.iter().enumerate() {
        crop.save(out_dir.join("regions").join(format!("{stem}-{i}.png")))?;
    }
    let text_path = out_dir.join("text").join(format!("{stem}.txt"));
    let mut text: String = run.result.recognized.lines.iter().map(|l| format!("{}\n", l.text)).collect();
    if let Some(utt) = &run.result.utterance {
        text.push_str(&format!("\n{}\n", utt.text));
    }
    fs::write(&text_path, text).map_err(io_err(&text_path))?;
    if let Some(clip) = &run.clip {
        let rel = PathBuf::from("audio").join(format!("{stem}.wav"));
        let path = out_dir.join(&rel);
        write_wav(clip, &path).map_err(io_err(&path))?;
        run.result.wav_path = Some(rel);
    }
    Ok(())
}

/// Decode `image_path`, run the pipeline and write its outputs under the
/// configured output directory.
pub fn run_pipeline(image_path: impl AsRef<Path>, cfg: &PipelineConfig) -> Result<PipelineResult, PipelineError> {
    let image_path = image_path.as_ref();
    let image = RasterImage::load(image_path)?;
    let pipeline = Pipeline::new(cfg.clone())?;
    let stem = image_path.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned());
    let mut run = pipeline.process(&image, &image_path.display().to_string(), &RunOptions::default());
    write_outputs(&mut run, &cfg.paths.out_dir, &stem);
    Ok(run.result)
}
