//! End-to-end tests of the command-line surface: subcommands, exit codes,
//! output formats, and stdout/stderr separation.

mod common;

use common::{event_clusters, gaussian_label_clusters, split_per_class, write_jsonl};
use rumorkit::metrics::{self, MetricsReport};
use rumorkit::model::Label;
use rumorkit::pipeline::run_to_string;
use serde_json::Value;
use std::path::PathBuf;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn path_str(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

fn ingest(ws: &Workspace, records_file: &str, index_file: &str) {
    let (code, out, err) = run_to_string(&[
        "rumorkit",
        "ingest",
        "--input",
        &ws.path_str(records_file),
        "--index",
        &ws.path_str(index_file),
    ]);
    assert_eq!(code, 0, "ingest failed: {err}");
    let summary: Value = serde_json::from_str(out.trim()).unwrap();
    assert!(summary["records"]["total"].as_u64().unwrap() > 0);
}

#[test]
fn ingest_query_round_trip() {
    let ws = Workspace::new();
    let records = gaussian_label_clusters(40, 16, 0.08, 11);
    write_jsonl(&ws.path("kb.jsonl"), &records);
    ingest(&ws, "kb.jsonl", "kb.idx");

    // query with a vector near the Rumor cluster center (class 1)
    let probe = records
        .iter()
        .find(|r| r.label == Label::Rumor)
        .unwrap()
        .vector
        .clone();
    std::fs::write(ws.path("q.json"), serde_json::to_string(&probe).unwrap()).unwrap();
    let (code, out, _) = run_to_string(&[
        "rumorkit",
        "query",
        "--index",
        &ws.path_str("kb.idx"),
        "--vector",
        &ws.path_str("q.json"),
    ]);
    assert_eq!(code, 0);
    let prediction: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(prediction["label"], 1);
    assert_eq!(prediction["neighbors"].as_array().unwrap().len(), 10);
    assert!(prediction["rumor_score"].as_f64().unwrap() > 0.9);
}

#[test]
fn query_with_k_beyond_corpus_returns_what_exists() {
    let ws = Workspace::new();
    let records = gaussian_label_clusters(2, 8, 0.05, 21); // 6 records
    write_jsonl(&ws.path("kb.jsonl"), &records);
    ingest(&ws, "kb.jsonl", "kb.idx");
    std::fs::write(
        ws.path("q.json"),
        serde_json::to_string(&records[0].vector).unwrap(),
    )
    .unwrap();
    let (code, out, _) = run_to_string(&[
        "rumorkit",
        "query",
        "--index",
        &ws.path_str("kb.idx"),
        "--vector",
        &ws.path_str("q.json"),
        "--k",
        "50",
    ]);
    assert_eq!(code, 0);
    let prediction: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(prediction["neighbors"].as_array().unwrap().len(), 6);
}

#[test]
fn evaluate_reports_metrics_and_dumped_pairs_reproduce_them() {
    let ws = Workspace::new();
    let records = gaussian_label_clusters(60, 24, 0.08, 31);
    let (base, test) = split_per_class(&records, 0.2);
    write_jsonl(&ws.path("kb.jsonl"), &base);
    write_jsonl(&ws.path("test.jsonl"), &test);
    ingest(&ws, "kb.jsonl", "kb.idx");

    let (code, out, err) = run_to_string(&[
        "rumorkit",
        "evaluate",
        "--index",
        &ws.path_str("kb.idx"),
        "--test",
        &ws.path_str("test.jsonl"),
        "--dump-pairs",
        &ws.path_str("pairs.jsonl"),
    ]);
    assert_eq!(code, 0, "evaluate failed: {err}");
    let report: MetricsReport = serde_json::from_str(out.trim()).unwrap();
    assert!(report.accuracy > 0.9);
    // the aligned table goes to stderr, not stdout
    assert!(err.contains("accuracy"));
    assert!(!out.contains("metric     value"));

    // recomputing the metrics from the dumped pairs must reproduce the report
    let dumped = std::fs::read_to_string(ws.path("pairs.jsonl")).unwrap();
    let mut pairs = Vec::new();
    let mut scored = Vec::new();
    for line in dumped.lines() {
        let row: Value = serde_json::from_str(line).unwrap();
        let actual = Label::from_code(row["actual"].as_u64().unwrap() as u8).unwrap();
        let predicted = Label::from_code(row["predicted"].as_u64().unwrap() as u8).unwrap();
        let score = row["rumor_score"].as_f64().unwrap();
        pairs.push((actual, predicted));
        scored.push((score, actual));
    }
    assert_eq!(pairs.len(), test.len());
    let matrix = metrics::accumulate(&pairs);
    let recomputed = MetricsReport::from_results(&matrix, &scored).unwrap();
    assert_eq!(recomputed, report);
}

#[test]
fn retrieval_eval_reports_hit_rate() {
    let ws = Workspace::new();
    let records = event_clusters(8, 5, 16, 0.02, 41);
    write_jsonl(&ws.path("kb.jsonl"), &records);
    write_jsonl(&ws.path("queries.jsonl"), &records);
    ingest(&ws, "kb.jsonl", "kb.idx");
    let (code, out, _) = run_to_string(&[
        "rumorkit",
        "retrieval-eval",
        "--index",
        &ws.path_str("kb.idx"),
        "--queries",
        &ws.path_str("queries.jsonl"),
    ]);
    assert_eq!(code, 0);
    let summary: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(summary["hit_rate"].as_f64().unwrap(), 1.0);
    assert_eq!(summary["queries"].as_u64().unwrap(), records.len() as u64);
}

#[test]
fn dedup_frames_collapses_static_stream() {
    let ws = Workspace::new();
    let lines: Vec<String> = (0..12)
        .map(|i| format!(r#"{{"hash":"00000000000000aa","index":{i},"timestamp":{}}}"#, i as f64 * 0.04))
        .collect();
    std::fs::write(ws.path("hashes.jsonl"), lines.join("\n")).unwrap();
    let (code, out, err) = run_to_string(&[
        "rumorkit",
        "dedup-frames",
        "--input",
        &ws.path_str("hashes.jsonl"),
        "--window",
        "10",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1);
    assert!(err.contains("retained 1 of 12"));
}

#[test]
fn fuse_text_merges_and_concatenates() {
    let ws = Workspace::new();
    std::fs::write(
        ws.path("audio.jsonl"),
        r#"{"text":"breaking news","start":1.0,"end":2.0,"origin":"audio"}
{"text":"fact check follows","start":5.0,"end":6.0,"origin":"audio"}
"#,
    )
    .unwrap();
    std::fs::write(
        ws.path("image.jsonl"),
        r#"{"text":"breaking news","start":1.2,"end":2.2,"origin":"image"}
{"text":"caption only","start":3.0,"end":4.0,"origin":"image"}
"#,
    )
    .unwrap();
    let (code, out, _) = run_to_string(&[
        "rumorkit",
        "fuse-text",
        "--audio",
        &ws.path_str("audio.jsonl"),
        "--image",
        &ws.path_str("image.jsonl"),
    ]);
    assert_eq!(code, 0);
    let fusion: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(
        fusion["text"].as_str().unwrap(),
        "breaking news caption only fact check follows"
    );
    assert_eq!(fusion["merged"].as_array().unwrap().len(), 3);
}

#[test]
fn loss_command_prints_batch_loss_and_gradients() {
    let ws = Workspace::new();
    std::fs::write(
        ws.path("pairs.jsonl"),
        r#"{"a":[1.0,0.0],"b":[1.0,0.0],"pair_label":0}
{"a":[1.0,0.0],"b":[0.0,1.0],"pair_label":1}
"#,
    )
    .unwrap();
    let (code, out, _) = run_to_string(&[
        "rumorkit",
        "loss",
        "--pairs",
        &ws.path_str("pairs.jsonl"),
    ]);
    assert_eq!(code, 0);
    let output: Value = serde_json::from_str(out.trim()).unwrap();
    // offline mean of (0.5 - 0)^2 = 0.25 and 1^2 = 1.0
    assert!((output["loss"].as_f64().unwrap() - 0.625).abs() <= 1e-12);
    assert_eq!(output["gradients"].as_array().unwrap().len(), 2);
    assert_eq!(output["gradients"][0]["grad_a"].as_array().unwrap().len(), 2);

    // online mining keeps both pairs here (negative below the positive, and
    // positive above the negative), so the mean is unchanged
    let (code, out, _) = run_to_string(&[
        "rumorkit",
        "loss",
        "--pairs",
        &ws.path_str("pairs.jsonl"),
        "--online",
    ]);
    assert_eq!(code, 0);
    let output: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(output["online"], true);
    assert!((output["loss"].as_f64().unwrap() - 0.625).abs() <= 1e-12);
}

#[test]
fn train_writes_updated_records() {
    let ws = Workspace::new();
    let records = gaussian_label_clusters(10, 8, 0.4, 51);
    write_jsonl(&ws.path("records.jsonl"), &records);
    let (code, out, err) = run_to_string(&[
        "rumorkit",
        "train",
        "--input",
        &ws.path_str("records.jsonl"),
        "--epochs",
        "50",
        "--lr",
        "0.3",
        "--seed",
        "7",
        "--output",
        &ws.path_str("trained.jsonl"),
    ]);
    assert_eq!(code, 0, "train failed: {err}");
    let summary: Value = serde_json::from_str(out.trim()).unwrap();
    let initial = summary["initial_loss"].as_f64().unwrap();
    let final_loss = summary["final_loss"].as_f64().unwrap();
    assert!(final_loss <= initial);
    let trained = std::fs::read_to_string(ws.path("trained.jsonl")).unwrap();
    assert_eq!(trained.lines().count(), records.len());
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let ws = Workspace::new();
    std::fs::write(ws.path("config.json"), r#"{"dedup": {"frame_window": 1}}"#).unwrap();
    // window 1 only compares against the immediate predecessor: with A B A B
    // nothing is discarded, while window 2 would also keep everything; use a
    // stream where window 1 vs CLI-window 10 differ: A A X A A ...
    let lines: Vec<String> = ["aa", "aa", "ff00ff00ff00ff00", "aa", "aa"]
        .iter()
        .enumerate()
        .map(|(i, h)| format!(r#"{{"hash":"{h}","index":{i},"timestamp":{}.0}}"#, i))
        .collect();
    std::fs::write(ws.path("hashes.jsonl"), lines.join("\n")).unwrap();

    // config window 1: frame 2 keeps (dissimilar), frame 4 discarded (similar
    // to frame 3), frame 3 keeps (dissimilar to frame 2)
    let (code, out, _) = run_to_string(&[
        "rumorkit",
        "--config",
        &ws.path_str("config.json"),
        "dedup-frames",
        "--input",
        &ws.path_str("hashes.jsonl"),
    ]);
    assert_eq!(code, 0);
    let with_config = out.lines().count();

    // flag overrides the config window
    let (code, out, _) = run_to_string(&[
        "rumorkit",
        "--config",
        &ws.path_str("config.json"),
        "dedup-frames",
        "--input",
        &ws.path_str("hashes.jsonl"),
        "--window",
        "2",
    ]);
    assert_eq!(code, 0);
    let with_flag = out.lines().count();
    assert_ne!(with_config, with_flag);
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    // unknown subcommand is a usage error
    let (code, _, err) = run_to_string(&["rumorkit", "frobnicate"]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());

    // missing flag value is a usage error
    let (code, _, _) = run_to_string(&["rumorkit", "query", "--index"]);
    assert_eq!(code, 1);

    // missing input file is a data error naming the path
    let (code, _, err) = run_to_string(&[
        "rumorkit",
        "ingest",
        "--input",
        "/no/such/records.jsonl",
        "--index",
        "/tmp/unused.idx",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("/no/such/records.jsonl"));
}

#[test]
fn version_names_the_index_format() {
    let (code, out, _) = run_to_string(&["rumorkit", "--version"]);
    assert_eq!(code, 0);
    assert!(out.contains("index format v1"), "got {out:?}");
}

#[test]
fn corrupt_index_file_is_a_data_error() {
    let ws = Workspace::new();
    let records = gaussian_label_clusters(5, 8, 0.1, 61);
    write_jsonl(&ws.path("kb.jsonl"), &records);
    ingest(&ws, "kb.jsonl", "kb.idx");
    // truncate the index
    let bytes = std::fs::read(ws.path("kb.idx")).unwrap();
    std::fs::write(ws.path("kb.idx"), &bytes[..bytes.len() - 7]).unwrap();
    std::fs::write(ws.path("q.json"), "[1,0,0,0,0,0,0,0]").unwrap();
    let (code, _, err) = run_to_string(&[
        "rumorkit",
        "query",
        "--index",
        &ws.path_str("kb.idx"),
        "--vector",
        &ws.path_str("q.json"),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("corrupt"), "got {err:?}");
}

/// The installed binary behaves like the in-process entry point.
#[test]
fn binary_smoke_test() {
    let ws = Workspace::new();
    let records = gaussian_label_clusters(10, 8, 0.1, 71);
    write_jsonl(&ws.path("kb.jsonl"), &records);
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_rumorkit"))
        .args([
            "ingest",
            "--input",
            &ws.path_str("kb.jsonl"),
            "--index",
            &ws.path_str("kb.idx"),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let summary: Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(summary["records"]["total"], 30);

    let missing = std::process::Command::new(env!("CARGO_BIN_EXE_rumorkit"))
        .args(["evaluate", "--index", &ws.path_str("kb.idx"), "--test", "/missing.jsonl"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn pgm_and_json_image_forms_hash_identically(){
    // the two documented image input forms agree on the same pixels
    let mut pgm = b"P5\n4 4\n255\n".to_vec();
    let pixels: Vec<u8> = (0..16).map(|i| (i * 16) as u8).collect();
    pgm.extend_from_slice(&pixels);
    let from_pgm = rumorkit::phash::GrayImage::from_pgm(&pgm).unwrap();
    let json = format!(
        r#"{{"width":4,"height":4,"pixels":{:?}}}"#,
        pixels.iter().map(|&p| p as f64).collect::<Vec<f64>>()
    );
    let from_json = rumorkit::phash::GrayImage::from_json(&json).unwrap();
    assert_eq!(
        rumorkit::phash::phash(&from_pgm).unwrap(),
        rumorkit::phash::phash(&from_json).unwrap()
    );
}

#[test]
fn help_lists_every_subcommand() {
    let (code, out, _) = run_to_string(&["rumorkit", "--help"]);
    assert_eq!(code, 0);
    for name in [
        "ingest",
        "query",
        "evaluate",
        "retrieval-eval",
        "dedup-frames",
        "fuse-text",
        "loss",
        "train",
    ] {
        assert!(out.contains(name), "help missing {name}: {out}");
    }
}
