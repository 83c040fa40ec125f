//! OCR engines driven out of process.
//!
//! Process contract: `<cmd> [args...] --image <path> --lang <tags>`; exit 0
//! with UTF-8 text on stdout is a result, one line per text line. Any other
//! exit status means the backend is unavailable.
//!
//! HTTP contract: multipart POST with the PNG-encoded region in the `image`
//! part and the language tags in `language`; the reply is JSON `{"text": ...}`.

use std::io::Cursor;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;

use crate::proc::{self, RunError};
use crate::raster::RasterImage;
use crate::recognizer::{BackendKind, OcrBackend, OcrError, RecognitionHints, RecognizedText, DEFAULT_TIMEOUT};

#[derive(Debug)]
pub struct ProcessBackend {
    id: String,
    command: PathBuf,
    args: Vec<String>,
    timeout: Duration,
    lock: Mutex<()>,
}

impl ProcessBackend {
    pub fn new(id: impl Into<String>, command: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            command: command.into(),
            args: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
            lock: Mutex::new(()),
        }
    }

    /// Arguments placed before the contract flags.
    pub fn with_args(mut self, args: Vec<String>) -> Self {
        self.args = args;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn unavailable(&self, reason: impl ToString) -> OcrError {
        OcrError::BackendUnavailable { backend: self.id.clone(), reason: reason.to_string() }
    }
}

impl OcrBackend for ProcessBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::ExternalProcess
    }

    fn recognize(&self, region: &RasterImage, hints: &RecognitionHints) -> Result<RecognizedText, OcrError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = tempfile::tempdir().map_err(|e| self.unavailable(e))?;
        let image_path = dir.path().join("region.png");
        region.save(&image_path)?;

        let mut args: Vec<std::ffi::OsString> = self.args.iter().map(Into::into).collect();
        args.push("--image".into());
        args.push(image_path.into_os_string());
        args.push("--lang".into());
        args.push(hints.lang_tags().into());

        let started = Instant::now();
        let stdout = proc::run(self.command.as_os_str(), &args, self.timeout).map_err(|e| match e {
            RunError::Timeout => OcrError::Timeout { backend: self.id.clone(), after: self.timeout },
            other => self.unavailable(other),
        })?;
        let text = String::from_utf8(stdout).map_err(|_| OcrError::Protocol {
            backend: self.id.clone(),
            reason: "stdout is not UTF-8".into(),
        })?;
        Ok(RecognizedText::from_plain(&self.id, &text, started.elapsed()))
    }
}

#[derive(Debug, Deserialize)]
struct HttpReply {
    text: String,
}

pub struct HttpBackend {
    id: String,
    endpoint: String,
    api_key: Option<(String, String)>,
    timeout: Duration,
    client: reqwest::blocking::Client,
    lock: Mutex<()>,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("id", &self.id)
            .field("endpoint", &self.endpoint)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl HttpBackend {
    /// `api_key` is a `(header, value)` pair sent with every request.
    pub fn new(
        id: impl Into<String>,
        endpoint: impl Into<String>,
        api_key: Option<(String, String)>,
        timeout: Duration,
    ) -> Result<Self, OcrError> {
        let id = id.into();
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| OcrError::BackendUnavailable { backend: id.clone(), reason: e.to_string() })?;
        Ok(Self { id, endpoint: endpoint.into(), api_key, timeout, client, lock: Mutex::new(()) })
    }

    fn map_err(&self, e: reqwest::Error) -> OcrError {
        if e.is_timeout() {
            OcrError::Timeout { backend: self.id.clone(), after: self.timeout }
        } else if e.is_decode() {
            OcrError::Protocol { backend: self.id.clone(), reason: e.to_string() }
        } else {
            OcrError::BackendUnavailable { backend: self.id.clone(), reason: e.to_string() }
        }
    }
}

impl OcrBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::HttpService
    }

    fn recognize(&self, region: &RasterImage, hints: &RecognitionHints) -> Result<RecognizedText, OcrError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut png = Vec::new();
        region
            .to_dynamic()
            .write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)
            .map_err(|e| OcrError::Protocol { backend: self.id.clone(), reason: e.to_string() })?;
        let part = reqwest::blocking::multipart::Part::bytes(png)
            .file_name("region.png")
            .mime_str("image/png")
            .expect("static mime type");
        let form = reqwest::blocking::multipart::Form::new()
            .part("image", part)
            .text("language", hints.lang_tags());

        let started = Instant::now();
        let mut request = self.client.post(&self.endpoint).multipart(form);
        if let Some((header, key)) = &self.api_key {
            request = request.header(header.as_str(), key.as_str());
        }
        let response = request.send().map_err(|e| self.map_err(e))?;
        if !response.status().is_success() {
            return Err(OcrError::BackendUnavailable {
                backend: self.id.clone(),
                reason: format!("HTTP {}", response.status()),
            });
        }
        let reply: HttpReply = response.json().map_err(|e| self.map_err(e))?;
        Ok(RecognizedText::from_plain(&self.id, &reply.text, started.elapsed()))
    }
}
