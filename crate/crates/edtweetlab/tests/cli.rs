use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edtweetlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The bundled fixture, copied so runs can write next to it.
fn fixture() -> (TempDir, PathBuf) {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::tempdir().unwrap();
    for name in ["config.toml", "set1.tsv", "set2.tsv", "set3.tsv", "labels.csv"] {
        std::fs::copy(src.join(name), dir.path().join(name)).unwrap();
    }
    let cfg = dir.path().join("config.toml");
    (dir, cfg)
}

#[test]
fn full_run_writes_every_artifact() {
    let (dir, cfg) = fixture();
    ok(&["run", "--config", s(&cfg)]);
    let out = dir.path().join("out");
    for f in ["corpus.tsv", "clean.tsv", "removed.csv", "stats.md", "report.csv", "report.md", "timing.csv", "manifest.json", "models/forest-cat1.bin", "models/transformer-cat4.bin"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["counts"]["labeled"], 50);
}

#[test]
fn missing_input_exits_2() {
    let (dir, cfg) = fixture();
    std::fs::remove_file(dir.path().join("labels.csv")).unwrap();
    let out = run(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("labels.csv"));
}

#[test]
fn unknown_config_key_exits_3() {
    let (dir, cfg) = fixture();
    let text = std::fs::read_to_string(&cfg).unwrap();
    std::fs::write(&cfg, text.replace("min_df = 1", "min_df = 1\nmax_dept = 3")).unwrap();
    let out = run(&["run", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_dept"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn schema_lists_defaults() {
    let text = ok(&["schema"]);
    assert!(text.contains("forest.cat1.max_depth = 7"));
    assert!(text.contains("forest.cat2.n_estimators = 1000"));
    assert!(text.contains("transformer.paper_protocol = false"));
    assert!(text.contains("preprocess.sim_threshold = 0.8"));
}

#[test]
fn help_lists_subcommands() {
    let text = ok(&["--help"]);
    for cmd in ["ingest", "preprocess", "stats", "train", "predict", "evaluate", "report", "run", "schema"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn stages_chain_by_hand() {
    let (dir, cfg) = fixture();
    let p = |n: &str| dir.path().join(n);
    let (corpus, clean, removed, labels, model) = (p("corpus.tsv"), p("clean.tsv"), p("removed.csv"), p("labels.csv"), p("forest.bin"));

    ok(&["ingest", "--in", s(&p("set1.tsv")), s(&p("set2.tsv")), s(&p("set3.tsv")), "--set", "1", "2", "3", "--out", s(&corpus)]);
    ok(&["preprocess", "--in", s(&corpus), "--out", s(&clean), "--removed-log", s(&removed)]);
    assert_eq!(std::fs::read_to_string(&removed).unwrap().lines().count(), 2);

    let stats = ok(&["stats", "--in", s(&clean), "--labels", s(&labels), "--top-k", "5"]);
    assert!(stats.contains("Label distribution"));

    ok(&["train", "--model", "forest", "--category", "1", "--config", s(&cfg), "--data", s(&clean), "--labels", s(&labels), "--out", s(&model)]);
    let preds = ok(&["predict", "--model", s(&model), "--data", s(&clean), "--config", s(&cfg)]);
    assert_eq!(preds.lines().count(), 1 + 50);

    let report = p("r.csv");
    ok(&[
        "--jobs", "2", "evaluate", "--config", s(&cfg), "--data", s(&clean), "--labels", s(&labels), "--models", "forest,rnn", "--categories", "1,2", "--report-csv", s(&report),
    ]);
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    let md = ok(&["report", "--in", s(&report), "--format", "markdown"]);
    assert!(md.contains("## Classification performance"));
}

#[test]
fn bad_category_is_a_usage_error() {
    let out = run(&["train", "--model", "forest", "--category", "5", "--data", "x", "--labels", "y", "--out", "z"]);
    assert_eq!(out.status.code(), Some(2));
}
