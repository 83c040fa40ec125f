//! Speech output: synthesizers behind [`TtsBackend`], WAV files, and the
//! timing check against the distance to the panel.
//!
//! The builtin synthesizer is a deterministic test-signal generator, not
//! speech: each character becomes a short tone. Real voices come from an
//! external engine driven through the process contract
//! `<cmd> [args...] --lang <tag> --text <utf8> --out <wav path>`.

pub mod timing;
pub mod wav;

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::Utterance;
use crate::corpus::Language;
use crate::proc::{self, RunError};

pub use timing::{check_feasibility, max_speed_for, Feasibility, TimingBudget, TimingError};
pub use wav::{encode_wav, read_wav, write_wav};

pub const DEFAULT_SAMPLE_RATE: u32 = 22_050;
pub const DEFAULT_RATE_WPM: f64 = 150.0;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

const FADE_S: f64 = 0.005;
const AMPLITUDE: f64 = 0.5 * i16::MAX as f64;

#[derive(Debug, Error)]
pub enum SpeechError {
    #[error("nothing to say")]
    EmptyUtterance,
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("speaking rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error("speech backend {backend} unavailable: {reason}")]
    BackendUnavailable { backend: String, reason: String },
    #[error("speech backend {backend} timed out after {after:?}")]
    Timeout { backend: String, after: Duration },
    #[error("{path}: not a usable WAV file: {reason}")]
    BadWav { path: PathBuf, reason: String },
}

impl SpeechError {
    pub fn is_unavailable(&self) -> bool {
        matches!(self, SpeechError::BackendUnavailable { .. })
    }
}

/// Mono 16-bit PCM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioClip {
    pub samples: Vec<i16>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Result<Self, SpeechError> {
        if sample_rate == 0 {
            return Err(SpeechError::ZeroSampleRate);
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voice {
    pub language: Language,
    pub rate_wpm: f64,
}

/// Seconds needed to say `text` at `rate_wpm`: 60 per word, at least one
/// word. `rate_wpm` must be positive.
pub fn estimate_duration(text: &str, rate_wpm: f64) -> f64 {
    let words = text.split_whitespace().count().max(1);
    60.0 * words as f64 / rate_wpm
}

/// Tone frequency for one character.
pub fn char_frequency(c: char) -> f64 {
    220.0 + 4.0 * f64::from(u32::from(c) % 256)
}

/// Test signal for `text`: one sine segment per character, segment `i`
/// spanning samples `floor(i·N/n)..floor((i+1)·N/n)` of the `N` samples in
/// [`estimate_duration`], each faded in and out linearly over 5 ms.
pub fn builtin_synthesize(text: &str, rate_wpm: f64, sample_rate: u32) -> AudioClip {
    let total = (estimate_duration(text, rate_wpm) * f64::from(sample_rate)).round() as usize;
    let chars: Vec<char> = text.chars().collect();
    let mut samples = vec![0i16; total];
    let n = chars.len();
    let fade = (FADE_S * f64::from(sample_rate)).round().max(1.0);
    for (i, &c) in chars.iter().enumerate() {
        let start = i * total / n;
        let end = (i + 1) * total / n;
        let len = end - start;
        let step = std::f64::consts::TAU * char_frequency(c) / f64::from(sample_rate);
        for (k, slot) in samples[start..end].iter_mut().enumerate() {
            let edge = k.min(len - 1 - k) as f64;
            let envelope = (edge / fade).min(1.0);
            *slot = (AMPLITUDE * envelope * (step * k as f64).sin()).round() as i16;
        }
    }
    AudioClip { samples, sample_rate: sample_rate.max(1) }
}

/// A text-to-speech engine. External engines serialize their own calls.
pub trait TtsBackend: Send + Sync {
    fn id(&self) -> &str;
    fn synthesize(&self, utt: &Utterance, voice: &Voice) -> Result<AudioClip, SpeechError>;
}

#[derive(Debug, Clone)]
pub struct BuiltinTts {
    pub sample_rate: u32,
}

impl Default for BuiltinTts {
    fn default() -> Self {
        Self { sample_rate: DEFAULT_SAMPLE_RATE }
    }
}

impl TtsBackend for BuiltinTts {
    fn id(&self) -> &str {
        "builtin"
    }

    fn synthesize(&self, utt: &Utterance, voice: &Voice) -> Result<AudioClip, SpeechError> {
        if self.sample_rate == 0 {
            return Err(SpeechError::ZeroSampleRate);
        }
        Ok(builtin_synthesize(&utt.text, voice.rate_wpm, self.sample_rate))
    }
}

/// External engine run once per utterance; it must write a mono 16-bit WAV
/// to the `--out` path and exit 0.
#[derive(Debug)]
pub struct ProcessTts {
    id: String,
    command: PathBuf,
    args: Vec<String>,
    timeout: Duration,
    lock: Mutex<()>,
}

impl ProcessTts {
    pub fn new(id: impl Into<String>, command: impl Into<PathBuf>, args: Vec<String>, timeout: Duration) -> Self {
        Self { id: id.into(), command: command.into(), args, timeout, lock: Mutex::new(()) }
    }

    fn unavailable(&self, reason: impl ToString) -> SpeechError {
        SpeechError::BackendUnavailable { backend: self.id.clone(), reason: reason.to_string() }
    }
}

impl TtsBackend for ProcessTts {
    fn id(&self) -> &str {
        &self.id
    }

    fn synthesize(&self, utt: &Utterance, voice: &Voice) -> Result<AudioClip, SpeechError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = tempfile::tempdir().map_err(|e| self.unavailable(e))?;
        let out = dir.path().join("speech.wav");
        let mut args: Vec<OsString> = self.args.iter().map(Into::into).collect();
        args.extend(["--lang".into(), voice.language.code().into(), "--text".into(), utt.text.clone().into()]);
        args.extend(["--out".into(), out.clone().into_os_string()]);
        proc::run(self.command.as_os_str(), &args, self.timeout).map_err(|e| match e {
            RunError::Timeout => SpeechError::Timeout { backend: self.id.clone(), after: self.timeout },
            other => self.unavailable(other),
        })?;
        read_wav(&out)
    }
}

fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}

fn default_timeout_s() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

/// Synthesizer description as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TtsBackendSpec {
    Builtin {
        #[serde(default = "default_sample_rate")]
        sample_rate: u32,
    },
    Process {
        command: PathBuf,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        args: Vec<String>,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
    },
}

impl Default for TtsBackendSpec {
    fn default() -> Self {
        TtsBackendSpec::Builtin { sample_rate: DEFAULT_SAMPLE_RATE }
    }
}

impl TtsBackendSpec {
    pub fn build(&self, id: &str) -> Box<dyn TtsBackend> {
        match self {
            TtsBackendSpec::Builtin { sample_rate } => Box::new(BuiltinTts { sample_rate: *sample_rate }),
            TtsBackendSpec::Process { command, args, timeout_s } => Box::new(ProcessTts::new(
                id,
                command.clone(),
                args.clone(),
                Duration::from_secs_f64(timeout_s.max(0.0)),
            )),
        }
    }
}

/// Synthesize through `backend`, rejecting blank utterances and non-positive
/// rates before the engine is involved.
pub fn synthesize(backend: &dyn TtsBackend, utt: &Utterance, voice: &Voice) -> Result<AudioClip, SpeechError> {
    if utt.text.trim().is_empty() {
        return Err(SpeechError::EmptyUtterance);
    }
    if !(voice.rate_wpm > 0.0) {
        return Err(SpeechError::InvalidRate(voice.rate_wpm));
    }
    backend.synthesize(utt, voice)
}
