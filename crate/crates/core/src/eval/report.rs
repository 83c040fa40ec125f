//! Writing benchmark reports as JSON or as an aligned text table.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::{EvalReport, ReportStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    TextTable,
}

const COLUMNS: [&str; 12] =
    ["backend", "status", "records", "precision", "recall", "f1", "cer", "wer", "empty", "utterance", "feasible", "p95_s"];

fn row(r: &EvalReport) -> [String; 12] {
    let f = |v: f64| format!("{v:.3}");
    [
        r.backend_id.clone(),
        match r.status {
            ReportStatus::Ok => "ok".into(),
            ReportStatus::Failed => "failed".into(),
        },
        r.records.to_string(),
        f(r.detection.precision),
        f(r.detection.recall),
        f(r.detection.f1),
        f(r.recognition.mean_cer),
        f(r.recognition.mean_wer),
        f(r.recognition.empty_output_rate),
        f(r.end_to_end.utterance_rate),
        f(r.end_to_end.feasibility_rate),
        f(r.timing.p95_s),
    ]
}

/// Header plus one row per report, columns padded to a common width.
/// Failure reasons follow the table.
pub fn render_table(reports: &[EvalReport]) -> String {
    let rows: Vec<[String; 12]> = reports.iter().map(row).collect();
    let widths: Vec<usize> = (0..COLUMNS.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([COLUMNS[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(COLUMNS.to_vec());
    for r in &rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    for r in reports {
        if let Some(err) = &r.error {
            out += &format!("{}: {err}\n", r.backend_id);
        }
    }
    out
}

pub fn write_report(reports: &[EvalReport], path: impl AsRef<Path>, format: ReportFormat) -> io::Result<()> {
    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(reports).expect("reports serialize") + "\n",
        ReportFormat::TextTable => render_table(reports),
    };
    fs::write(path, text)
}

pub fn read_report(path: impl AsRef<Path>) -> io::Result<Vec<EvalReport>> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}
