//! `panelvoice`: read a traffic-panel photo aloud.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 a stage failed (only
//! without `--lenient`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use panelvoice::composer::{dominant_language, Utterance};
use panelvoice::corpus::{corpus_stats, load_manifest, validate_corpus, Direction, Language};
use panelvoice::detector::{detect_text_regions, TextRegion};
use panelvoice::eval::{load_backends, render_table, run_benchmark, write_report, BenchmarkOptions, ReportFormat, ReportStatus};
use panelvoice::par::Execution;
use panelvoice::pipeline::{run_pipeline, Pipeline, PipelineConfig, RunOptions, CONFIG_ENV};
use panelvoice::raster::RasterImage;
use panelvoice::recognizer::{normalize_text, BackendEntry, OcrBackendSpec};
use panelvoice::speech::{synthesize, write_wav, Voice};
use panelvoice::synthetic::write_corpus;

#[derive(Parser, Debug)]
#[command(name = "panelvoice", version, about = "Turn photos of roadside traffic panels into spoken messages")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Pipeline configuration (TOML, or JSON by extension).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Report stage failures but exit 0.
    #[arg(long, global = true)]
    lenient: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find text lines on a panel photo.
    Detect { image: PathBuf },
    /// Detect and read the text on a panel photo.
    Recognize {
        image: PathBuf,
        /// Read the whole image as one region instead of detecting lines.
        #[arg(long)]
        whole: bool,
        /// Expected panel language; repeatable.
        #[arg(long = "lang", value_parser = parse_language)]
        languages: Vec<Language>,
    },
    /// Turn text lines into an utterance.
    Compose {
        /// Panel lines in reading order.
        #[arg(required = true)]
        lines: Vec<String>,
        #[arg(long, value_parser = parse_direction)]
        direction: Option<Direction>,
        #[arg(long = "lang", value_parser = parse_language)]
        language: Option<Language>,
    },
    /// Synthesize text to a WAV file.
    Speak {
        #[arg(long)]
        text: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "lang", value_parser = parse_language)]
        language: Option<Language>,
        /// Words per minute; defaults to the configured rate.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Run every stage on a panel photo and write the outputs.
    Pipeline {
        image: PathBuf,
        #[arg(long, value_parser = parse_direction)]
        direction: Option<Direction>,
    },
    /// Compare OCR backends over an annotated corpus.
    Eval {
        /// Corpus manifest.
        #[arg(long)]
        corpus: PathBuf,
        /// Backend list (`[[backend]]` tables); defaults to the builtin recognizer.
        #[arg(long)]
        backends: Option<PathBuf>,
        /// Report file; defaults to `report.json` in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        /// Vehicle speed for the feasibility rate; defaults to the configured speed.
        #[arg(long)]
        reference_speed: Option<f64>,
        /// Evaluate records one at a time.
        #[arg(long)]
        sequential: bool,
    },
    /// Manifest utilities.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Subcommand, Debug)]
enum CorpusCommand {
    /// Check a manifest against its images.
    Validate { manifest: PathBuf },
    /// Count records per category, language and source.
    Stats { manifest: PathBuf },
    /// Render the synthetic panels and their manifest into a directory.
    Synth {
        dir: PathBuf,
        /// Also write a noisy copy of every panel.
        #[arg(long)]
        noisy: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Table,
}

fn parse_language(s: &str) -> Result<Language, String> {
    Language::parse(s).ok_or_else(|| format!("unknown language {s:?} (assamese, hindi, english)"))
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    Direction::parse(s).ok_or_else(|| format!("unknown direction {s:?} (left, right, straight)"))
}

/// Whether a command finished cleanly or a stage failed.
#[derive(Debug, PartialEq, Eq)]
enum Status {
    Done,
    StageFailed,
}

impl Status {
    fn from_ok(ok: bool) -> Self {
        if ok {
            Status::Done
        } else {
            Status::StageFailed
        }
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value serializes"));
}

fn load_config(global: &Global) -> Result<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &global.out_dir {
        cfg.paths.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn load_image(path: &Path) -> Result<RasterImage> {
    RasterImage::load(path).with_context(|| format!("cannot decode {}", path.display()))
}

fn detect(global: &Global, cfg: &PipelineConfig, image: &Path) -> Result<Status> {
    let img = load_image(image)?;
    let regions = detect_text_regions(&img, &cfg.detector);
    if global.json {
        print_json(&serde_json::to_value(&regions)?);
    } else {
        for r in &regions {
            let b = r.bbox;
            println!("{}\t{} {} {} {}\t{:.3}", r.line_index, b.x, b.y, b.w, b.h, r.score);
        }
    }
    Ok(Status::Done)
}

fn recognize(global: &Global, cfg: PipelineConfig, image: &Path, whole: bool, languages: Vec<Language>) -> Result<Status> {
    let img = load_image(image)?;
    let pipeline = Pipeline::new(cfg)?;
    let regions = if whole {
        vec![TextRegion {
            bbox: img.bounds(),
            line_index: 0,
            component_boxes: Vec::new(),
            score: 1.0,
        }]
    } else {
        detect_text_regions(&img, &pipeline.config().detector)
    };
    let opts = RunOptions { direction: None, languages };
    let (text, _, failure) = pipeline.read_regions(&img, &regions, &opts);
    if global.json {
        print_json(&json!({ "regions": regions, "recognized": text, "failure": failure }));
    } else {
        for line in &text.lines {
            println!("{}", line.text);
        }
        if let Some(f) = &failure {
            eprintln!("ocr: {}", f.message);
        }
    }
    Ok(Status::from_ok(failure.is_none()))
}

fn compose(
    global: &Global,
    cfg: PipelineConfig,
    lines: Vec<String>,
    direction: Option<Direction>,
    language: Option<Language>,
) -> Result<Status> {
    let pipeline = Pipeline::new(cfg)?;
    let lines: Vec<String> = lines.iter().map(|l| normalize_text(l)).collect();
    let language = language
        .or(pipeline.config().language)
        .unwrap_or_else(|| dominant_language(&lines.join(" ")));
    let direction = direction.or(pipeline.config().direction);
    match pipeline.composer().compose(&lines, direction, language) {
        Ok((message, utterance)) => {
            if global.json {
                print_json(&json!({ "message": message, "utterance": utterance }));
            } else {
                println!("{}", utterance.text);
            }
            Ok(Status::Done)
        }
        Err(e) => {
            if global.json {
                print_json(&json!({ "error": e.to_string() }));
            }
            eprintln!("compose: {e}");
            Ok(Status::StageFailed)
        }
    }
}

fn speak(
    global: &Global,
    cfg: PipelineConfig,
    text: &str,
    out: &Path,
    language: Option<Language>,
    rate: Option<f64>,
) -> Result<Status> {
    let pipeline = Pipeline::new(cfg)?;
    let language = language.or(pipeline.config().language).unwrap_or_else(|| dominant_language(text));
    let voice = Voice { language, rate_wpm: rate.unwrap_or(pipeline.config().rate_wpm) };
    let utt = Utterance::new(text, language);
    let clip = match synthesize(pipeline.tts_backend(), &utt, &voice) {
        Ok(clip) => clip,
        Err(e) => {
            if global.json {
                print_json(&json!({ "error": e.to_string() }));
            }
            eprintln!("tts: {e}");
            return Ok(Status::StageFailed);
        }
    };
    write_wav(&clip, out).with_context(|| format!("cannot write {}", out.display()))?;
    if global.json {
        print_json(&json!({
            "path": out,
            "duration_s": clip.duration_s(),
            "sample_rate": clip.sample_rate,
            "samples": clip.samples.len(),
        }));
    } else {
        println!("{}: {:.3} s", out.display(), clip.duration_s());
    }
    Ok(Status::Done)
}

fn pipeline(global: &Global, cfg: PipelineConfig, image: &Path, direction: Option<Direction>) -> Result<Status> {
    let mut cfg = cfg;
    if direction.is_some() {
        cfg.direction = direction;
    }
    let result = run_pipeline(image, &cfg)?;
    if global.json {
        print_json(&serde_json::to_value(&result)?);
    } else {
        let mut out = String::new();
        for line in &result.recognized.lines {
            writeln!(out, "text: {}", line.text)?;
        }
        if let Some(utt) = &result.utterance {
            writeln!(out, "utterance ({}): {}", utt.language, utt.text)?;
        }
        if let Some(wav) = &result.wav_path {
            writeln!(out, "audio: {}", cfg.paths.out_dir.join(wav).display())?;
        }
        if let (Some(f), Some(audio)) = (&result.feasibility, result.audio_s) {
            let verdict = if f.feasible { "feasible" } else { "too late" };
            writeln!(out, "timing: {audio:.2} s speech, slack {:.2} s, {verdict}", f.slack_s)?;
        }
        print!("{out}");
        for f in &result.failures {
            eprintln!("{:?} failed: {}", f.stage, f.message);
        }
    }
    Ok(Status::from_ok(result.succeeded()))
}

#[allow(clippy::too_many_arguments)]
fn eval(
    global: &Global,
    cfg: PipelineConfig,
    corpus: &Path,
    backends: Option<&Path>,
    out: Option<PathBuf>,
    format: FormatArg,
    reference_speed: Option<f64>,
    sequential: bool,
) -> Result<Status> {
    let manifest = load_manifest(corpus)?;
    let report = validate_corpus(&manifest.corpus, &manifest.image_root);
    if !report.ok {
        bail!("{}: {} validation findings; run `corpus validate`", corpus.display(), report.findings.len());
    }
    let entries = match backends {
        Some(path) => load_backends(path)?,
        None => vec![BackendEntry { id: "builtin".into(), spec: OcrBackendSpec::default() }],
    };
    let opts = BenchmarkOptions {
        reference_speed_mps: reference_speed.unwrap_or(cfg.timing.speed_mps),
        execution: if sequential { Execution::Sequential } else { Execution::Parallel },
        ..BenchmarkOptions::default()
    };
    let reports = run_benchmark(&manifest.corpus, &manifest.image_root, &entries, &cfg, &opts);
    let format = match format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Table => ReportFormat::TextTable,
    };
    let out = out.unwrap_or_else(|| cfg.paths.out_dir.join("report.json"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    write_report(&reports, &out, format).with_context(|| format!("cannot write {}", out.display()))?;
    if global.json {
        print_json(&serde_json::to_value(&reports)?);
    } else {
        print!("{}", render_table(&reports));
    }
    Ok(Status::from_ok(reports.iter().all(|r| r.status == ReportStatus::Ok)))
}

fn corpus(global: &Global, cmd: CorpusCommand) -> Result<Status> {
    match cmd {
        CorpusCommand::Validate { manifest } => {
            let loaded = load_manifest(&manifest)?;
            let report = validate_corpus(&loaded.corpus, &loaded.image_root);
            if global.json {
                print_json(&json!({ "ok": report.ok, "findings": report.findings, "warnings": loaded.warnings }));
            } else {
                for w in &loaded.warnings {
                    println!("warning: {w}");
                }
                for f in &report.findings {
                    println!("{}: {}", f.record_id, f.detail);
                }
                println!("{} records, {} findings", loaded.corpus.len(), report.findings.len());
            }
            Ok(Status::from_ok(report.ok))
        }
        CorpusCommand::Stats { manifest } => {
            let loaded = load_manifest(&manifest)?;
            let stats = corpus_stats(&loaded.corpus);
            if global.json {
                print_json(&serde_json::to_value(&stats)?);
            } else {
                print!("{stats}");
            }
            Ok(Status::Done)
        }
        CorpusCommand::Synth { dir, noisy } => {
            let corpus = write_corpus(&dir, noisy)?;
            let manifest = dir.join("manifest.json");
            if global.json {
                print_json(&json!({ "manifest": manifest, "records": corpus.len() }));
            } else {
                println!("{}: {} records", manifest.display(), corpus.len());
            }
            Ok(Status::Done)
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    let global = cli.global;
    let cfg = load_config(&global)?;
    match cli.command {
        Command::Detect { image } => detect(&global, &cfg, &image),
        Command::Recognize { image, whole, languages } => recognize(&global, cfg, &image, whole, languages),
        Command::Compose { lines, direction, language } => compose(&global, cfg, lines, direction, language),
        Command::Speak { text, out, language, rate } => speak(&global, cfg, &text, &out, language, rate),
        Command::Pipeline { image, direction } => pipeline(&global, cfg, &image, direction),
        Command::Eval { corpus, backends, out, format, reference_speed, sequential } => {
            eval(&global, cfg, &corpus, backends.as_deref(), out, format, reference_speed, sequential)
        }
        Command::Corpus(cmd) => corpus(&global, cmd),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let lenient = cli.global.lenient;
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::StageFailed) if lenient => ExitCode::SUCCESS,
        Ok(Status::StageFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
