use std::fs;
use std::path::{Path, PathBuf};

use panelvoice::corpus::load_manifest;
use panelvoice::detector::{detect_text_regions, DetectorConfig};
use panelvoice::eval::{run_benchmark, BenchmarkOptions};
use panelvoice::par::Execution;
use panelvoice::pipeline::{run_pipeline, PathsConfig, PipelineConfig};
use panelvoice::recognizer::BackendEntry;
use panelvoice::synthetic::{render_panel, standard_designs, Noise, BACKGROUND};
use proptest::prelude::*;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

fn config(out: &Path) -> PipelineConfig {
    PipelineConfig { paths: PathsConfig { out_dir: out.to_path_buf() }, ..PipelineConfig::default() }
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let image = fixtures().join("images/c1-hi.png");
    let a = run_pipeline(&image, &config(&dir.path().join("a"))).unwrap();
    let b = run_pipeline(&image, &config(&dir.path().join("b"))).unwrap();
    assert!(a.succeeded(), "{:?}", a.failures);
    assert_eq!(a.stable_json(), b.stable_json());
    let wav = a.wav_path.clone().unwrap();
    let wa = fs::read(dir.path().join("a").join(&wav)).unwrap();
    let wb = fs::read(dir.path().join("b").join(&wav)).unwrap();
    assert_eq!(wa, wb);
    assert_eq!(a.utterance.unwrap().text, "नगर, 25 किलोमीटर आगे। NAGAR, 25 किलोमीटर आगे।");
}

#[test]
fn every_fixture_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let loaded = load_manifest(fixtures().join("manifest.json")).unwrap();
    for record in &loaded.corpus.records {
        let mut cfg = config(dir.path());
        cfg.direction = record.direction();
        let result = run_pipeline(loaded.image_root.join(&record.image_path), &cfg).unwrap();
        assert!(result.succeeded(), "{}: {:?}", record.id, result.failures);
        let lines: Vec<&str> = result.recognized.lines.iter().map(|l| l.text.as_str()).collect();
        let expected: Vec<&str> = record.ordered_regions().iter().map(|r| r.transcript.as_str()).collect();
        assert_eq!(lines, expected);
        assert_eq!(result.message.as_ref().unwrap().category, record.category);
        let t = result.stage_timings;
        assert!(t.detect_s >= 0.0 && t.ocr_s >= 0.0 && t.compose_s >= 0.0 && t.tts_s >= 0.0);
        assert!(t.processing_s() <= t.total_s);
        let f = result.feasibility.unwrap();
        assert!(f.feasible, "{}: slack {}", record.id, f.slack_s);
    }
}

#[test]
fn benchmark_is_schedule_independent() {
    let loaded = load_manifest(fixtures().join("manifest.json")).unwrap();
    let backends = [BackendEntry { id: "builtin".into(), spec: Default::default() }];
    let cfg = PipelineConfig::default();
    let run = |execution| {
        let opts = BenchmarkOptions { execution, ..BenchmarkOptions::default() };
        let mut r = run_benchmark(&loaded.corpus, &loaded.image_root, &backends, &cfg, &opts).remove(0);
        r.timing.mean_s = 0.0;
        r.timing.p95_s = 0.0;
        r
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn detection_follows_translation(design in 0usize..12, dx in 0u32..120, dy in 0u32..80, noisy in any::<bool>()) {
        let d = &standard_designs()[design];
        let noise = noisy.then(|| Noise::standard(design as u64 + 1));
        let (img, _) = render_panel(d, noise).unwrap();
        let shifted = img.pad(dx, dy, img.width() + dx + 40, img.height() + dy + 30, &BACKGROUND).unwrap();
        let cfg = DetectorConfig::default();
        let base = detect_text_regions(&img, &cfg);
        let moved = detect_text_regions(&shifted, &cfg);
        prop_assert!(!base.is_empty());
        prop_assert_eq!(base.len(), moved.len());
        for (a, b) in base.iter().zip(&moved) {
            prop_assert_eq!(a.bbox.translate(dx, dy), b.bbox);
            prop_assert_eq!(a.line_index, b.line_index);
        }
    }
}
