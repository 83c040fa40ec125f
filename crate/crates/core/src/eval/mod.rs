//! Backend comparison over an annotated corpus: detection, recognition,
//! end-to-end and timing metrics per OCR backend.

pub mod metrics;
pub mod report;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PanelRecord};
use crate::geometry::BBox;
use crate::par::{self, Execution};
use crate::pipeline::{FailureKind, Pipeline, PipelineConfig, PipelineError, RunOptions};
use crate::raster::RasterImage;
use crate::recognizer::normalize::normalize_text;
use crate::recognizer::BackendEntry;
use crate::speech::{check_feasibility, TimingBudget};

pub use metrics::{cer, edit_distance, f1, iou, levenshtein, match_detections, wer, DetectionCounts, EmptyReference};
pub use report::{read_report, render_table, write_report, ReportFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub iou_threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionReport {
    pub mean_cer: f64,
    pub mean_wer: f64,
    pub empty_output_rate: f64,
    /// Both sides went through text normalization before comparison.
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndReport {
    pub utterance_rate: f64,
    pub feasibility_rate: f64,
    pub reference_speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub mean_s: f64,
    pub p95_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub backend_id: String,
    pub status: ReportStatus,
    pub error: Option<String>,
    pub records: usize,
    pub detection: DetectionReport,
    pub recognition: RecognitionReport,
    pub end_to_end: EndToEndReport,
    pub timing: TimingReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkOptions {
    pub reference_speed_mps: f64,
    pub iou_threshold: f64,
    pub execution: Execution,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self { reference_speed_mps: 20.0, iou_threshold: 0.5, execution: Execution::Parallel }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BackendList {
    backend: Vec<BackendEntry>,
}

/// Read a backend list: TOML `[[backend]]` tables (or a JSON array when the
/// file ends in `.json`), each an `id` plus an OCR backend spec.
pub fn load_backends(path: impl AsRef<Path>) -> Result<Vec<BackendEntry>, PipelineError> {
    let path = path.as_ref();
    let fail = |reason: String| PipelineError::Config { path: path.to_path_buf(), reason };
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let entries = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?
    } else {
        toml::from_str::<BackendList>(&text).map_err(|e| fail(e.to_string()))?.backend
    };
    let mut seen = std::collections::HashSet::new();
    for entry in &entries {
        if !seen.insert(entry.id.as_str()) {
            return Err(fail(format!("backend id {:?} listed twice", entry.id)));
        }
    }
    Ok(entries)
}

/// What one record contributed.
#[derive(Debug, Clone, PartialEq)]
struct RecordOutcome {
    detection: DetectionCounts,
    cer: Option<f64>,
    wer: Option<f64>,
    empty_output: bool,
    utterance: bool,
    feasible: bool,
    seconds: f64,
    unavailable: Option<String>,
}

fn evaluate_record(
    pipeline: &Pipeline,
    record: &PanelRecord,
    image_root: &Path,
    opts: &BenchmarkOptions,
) -> RecordOutcome {
    let gt: Vec<BBox> = record.regions.iter().map(|r| r.bbox).collect();
    let reference = normalize_text(&record.transcript());
    let image = match RasterImage::load(image_root.join(&record.image_path)) {
        Ok(img) => img,
        Err(e) => {
            log::warn!("{}: {e}", record.id);
            return RecordOutcome {
                detection: match_detections(&[], &gt, opts.iou_threshold),
                cer: cer(&reference, "").ok(),
                wer: wer(&reference, "").ok(),
                empty_output: true,
                utterance: false,
                feasible: false,
                seconds: 0.0,
                unavailable: None,
            };
        }
    };
    let run_opts = RunOptions { direction: record.direction(), languages: record.languages.iter().copied().collect() };
    let result = pipeline.process(&image, &record.id, &run_opts).result;
    let pred: Vec<BBox> = result.regions.iter().map(|r| r.bbox).collect();
    let hypothesis = normalize_text(&result.recognized.joined());
    let feasible = result.audio_s.is_some_and(|speech_s| {
        let budget = TimingBudget {
            distance_m: pipeline.config().timing.distance_m,
            speed_mps: opts.reference_speed_mps,
            processing_s: result.stage_timings.processing_s(),
            speech_s,
        };
        check_feasibility(&budget).is_ok_and(|f| f.feasible)
    });
    RecordOutcome {
        detection: match_detections(&pred, &gt, opts.iou_threshold),
        cer: cer(&reference, &hypothesis).ok(),
        wer: wer(&reference, &hypothesis).ok(),
        empty_output: hypothesis.is_empty(),
        utterance: result.utterance.is_some(),
        feasible,
        seconds: result.stage_timings.total_s,
        unavailable: result
            .failures
            .iter()
            .find(|f| f.kind == FailureKind::Unavailable)
            .map(|f| f.message.clone()),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Nearest-rank 95th percentile.
fn p95(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (0.95 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn rate(outcomes: &[RecordOutcome], pick: impl Fn(&RecordOutcome) -> bool) -> f64 {
    if outcomes.is_empty() {
        0.0
    } else {
        outcomes.iter().filter(|o| pick(o)).count() as f64 / outcomes.len() as f64
    }
}

fn failed_report(id: &str, records: usize, error: String, opts: &BenchmarkOptions) -> EvalReport {
    EvalReport {
        backend_id: id.to_string(),
        status: ReportStatus::Failed,
        error: Some(error),
        records,
        detection: DetectionReport {
            iou_threshold: opts.iou_threshold,
            tp: 0,
            fp: 0,
            fn_: 0,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        },
        recognition: RecognitionReport { mean_cer: 0.0, mean_wer: 0.0, empty_output_rate: 0.0, normalized: true },
        end_to_end: EndToEndReport {
            utterance_rate: 0.0,
            feasibility_rate: 0.0,
            reference_speed_mps: opts.reference_speed_mps,
        },
        timing: TimingReport { mean_s: 0.0, p95_s: 0.0 },
    }
}

/// Run the whole pipeline on every record once per backend. A backend that
/// cannot be built or reports itself unavailable gets a failed report and
/// the remaining backends still run. Per-call timeouts count as empty output.
pub fn run_benchmark(
    corpus: &Corpus,
    image_root: &Path,
    backends: &[BackendEntry],
    cfg: &PipelineConfig,
    opts: &BenchmarkOptions,
) -> Vec<EvalReport> {
    let mut reports = Vec::with_capacity(backends.len());
    for entry in backends {
        let n = corpus.len();
        let pipeline = entry
            .spec
            .build(&entry.id)
            .map_err(|e| e.to_string())
            .and_then(|ocr| {
                Pipeline::with_backends(cfg.clone(), ocr, cfg.tts_backend.build("tts")).map_err(|e| e.to_string())
            });
        let pipeline = match pipeline {
            Ok(p) => p,
            Err(e) => {
                reports.push(failed_report(&entry.id, n, e, opts));
                continue;
            }
        };
        let outcomes = par::map(opts.execution, &corpus.records, |record| {
            evaluate_record(&pipeline, record, image_root, opts)
        });
        if let Some(reason) = outcomes.iter().find_map(|o| o.unavailable.clone()) {
            reports.push(failed_report(&entry.id, n, reason, opts));
            continue;
        }
        let mut counts = DetectionCounts::default();
        for o in &outcomes {
            counts.add(o.detection);
        }
        let seconds: Vec<f64> = outcomes.iter().map(|o| o.seconds).collect();
        reports.push(EvalReport {
            backend_id: entry.id.clone(),
            status: ReportStatus::Ok,
            error: None,
            records: n,
            detection: DetectionReport {
                iou_threshold: opts.iou_threshold,
                tp: counts.tp,
                fp: counts.fp,
                fn_: counts.fn_,
                precision: counts.precision(),
                recall: counts.recall(),
                f1: counts.f1(),
            },
            recognition: RecognitionReport {
                mean_cer: mean(outcomes.iter().filter_map(|o| o.cer)),
                mean_wer: mean(outcomes.iter().filter_map(|o| o.wer)),
                empty_output_rate: rate(&outcomes, |o| o.empty_output),
                normalized: true,
            },
            end_to_end: EndToEndReport {
                utterance_rate: rate(&outcomes, |o| o.utterance),
                feasibility_rate: rate(&outcomes, |o| o.feasible),
                reference_speed_mps: opts.reference_speed_mps,
            },
            timing: TimingReport { mean_s: mean(seconds.iter().copied()), p95_s: p95(&seconds) },
        });
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentile() {
        assert_eq!(p95(&[]), 0.0);
        assert_eq!(p95(&[3.0]), 3.0);
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(p95(&v), 19.0);
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(p95(&v), 95.0);
    }

    #[test]
    fn backend_lists_parse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.toml");
        fs::write(
            &path,
            "[[backend]]\nid = \"builtin\"\nkind = \"builtin\"\n\n[[backend]]\nid = \"stub\"\nkind = \"process\"\ncommand = \"true\"\n",
        )
        .unwrap();
        let list = load_backends(&path).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].spec, crate::recognizer::OcrBackendSpec::Builtin { atlas: None });
        assert!(matches!(&list[1].spec, crate::recognizer::OcrBackendSpec::Process { command, .. } if command.as_os_str() == "true"));
        let json = dir.path().join("b.json");
        fs::write(&json, r#"[{"id": "a", "kind": "builtin"}, {"id": "a", "kind": "builtin"}]"#).unwrap();
        assert!(load_backends(&json).is_err());
    }

    #[test]
    fn empty_corpus_reports_zero_records() {
        let reports = run_benchmark(
            &Corpus::default(),
            Path::new("."),
            &[BackendEntry { id: "builtin".into(), spec: Default::default() }],
            &PipelineConfig::default(),
            &BenchmarkOptions::default(),
        );
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].records, 0);
        assert_eq!(reports[0].status, ReportStatus::Ok);
    }
}
