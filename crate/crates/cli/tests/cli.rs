use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stateval");
const REPLAY: &str = env!("CARGO_BIN_EXE_stateval-replay-adapter");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/episodes.jsonl")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// ingest, classify, expand and filter into `dir`; returns the final dataset.
fn build(dir: &Path, seed: &str) -> PathBuf {
    let ds = dir.join("ds.jsonl");
    let classified = dir.join("classified.jsonl");
    let expanded = dir.join("expanded.jsonl");
    let filtered = dir.join("filtered.jsonl");
    ok(&["ingest", "--input", p(&fixture()), "--out", p(&ds)]);
    ok(&["--seed", seed, "classify", "--dataset", p(&ds), "--out", p(&classified)]);
    ok(&["--seed", seed, "expand", "--dataset", p(&classified), "--out", p(&expanded)]);
    ok(&["--seed", seed, "filter", "--dataset", p(&expanded), "--out", p(&filtered), "--audit", p(&dir.join("audit.jsonl"))]);
    filtered
}

#[test]
fn pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let da = fs::read(build(a.path(), "11")).unwrap();
    let db = fs::read(build(b.path(), "11")).unwrap();
    assert_eq!(da, db);
    assert!(String::from_utf8(da).unwrap().contains("\"kind\":\"instruction\""));
}

#[test]
fn stdio_replay_adapter_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build(dir.path(), "3");
    let preds = dir.path().join("preds.jsonl");
    let cache = dir.path().join("cache.jsonl");
    let cmd = format!("'{REPLAY}' '{}'", p(&ds));
    let out = ok(&["run-adapter", "--dataset", p(&ds), "--dimension", "mwam", "--out", p(&preds), "--command", &cmd, "--cache", p(&cache)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"cache_hits\":0"));

    let report = dir.path().join("report");
    let out = ok(&["evaluate", "--dataset", p(&ds), "--predictions", p(&preds), "--dimension", "mwam", "--out", p(&report)]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("| 0.00 | 0.00 | 0.00 | 100.00 | 100.00 | 100.00 |"), "{table}");

    // a second run is served entirely from the cache, without an adapter
    let again = dir.path().join("again.jsonl");
    let out = ok(&["run-adapter", "--dataset", p(&ds), "--dimension", "mwam", "--out", p(&again), "--cache", p(&cache), "--agent-id", "replay"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"calls\":0"));
    assert_eq!(fs::read(&preds).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn report_rerender_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build(dir.path(), "5");
    let preds = dir.path().join("preds.jsonl");
    ok(&["run-adapter", "--dataset", p(&ds), "--dimension", "uwiu", "--out", p(&preds), "--replay"]);
    let first = dir.path().join("first");
    ok(&["evaluate", "--dataset", p(&ds), "--predictions", p(&preds), "--dimension", "uwiu", "--out", p(&first)]);
    let second = dir.path().join("second");
    ok(&["report", "--summary", p(&first.join("summary.json")), "--out", p(&second)]);
    for name in ["summary.json", "report.md", "per_state.csv", "histogram.csv"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn unknown_instruction_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build(dir.path(), "1");
    let preds = dir.path().join("preds.jsonl");
    fs::write(
        &preds,
        "{\"instruction_id\":\"nope-1\",\"agent_id\":\"a\",\"raw\":\"WAIT\"}\n{\"instruction_id\":\"nope-2\",\"agent_id\":\"a\",\"raw\":\"WAIT\"}\n",
    )
    .unwrap();
    let out = run(&["evaluate", "--dataset", p(&ds), "--predictions", p(&preds), "--dimension", "mwam", "--out", p(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "unknown_instruction_id");
    assert!(err["message"].as_str().unwrap().contains("nope-1"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["evaluate", "--dimension", "sideways"]).status.code(), Some(2));
}

#[test]
fn tree_merges_shared_screens() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.jsonl");
    ok(&["ingest", "--input", p(&fixture()), "--out", p(&ds)]);
    let tree = dir.path().join("tree.json");
    let merged = dir.path().join("merged.jsonl");
    ok(&["tree", "--dataset", p(&ds), "--out", p(&tree), "--merge-key", "screenshot", "--merged-dataset", p(&merged)]);
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&tree).unwrap()).unwrap();
    // home, settings, wifi, shop, search
    assert_eq!(t["nodes"].as_array().unwrap().len(), 5);
    let again = dir.path().join("again.json");
    ok(&["tree", "--dataset", p(&merged), "--out", p(&again), "--merge-key", "screenshot"]);
    assert_eq!(fs::read(&tree).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let ds = build(dir.path(), "2");
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "[pipeline]\nmock_reject_low_high = 1.0\n").unwrap();
    let out = dir.path().join("none.jsonl");
    ok(&["--config", p(&cfg), "filter", "--dataset", p(&ds), "--out", p(&out)]);
    assert!(!fs::read_to_string(&out).unwrap().contains("\"kind\":\"instruction\""));

    fs::write(&cfg, "[pipeline]\nno_such_key = 1\n[nonsense]\n").unwrap();
    let bad = run(&["--config", p(&cfg), "filter", "--dataset", p(&ds), "--out", p(&out)]);
    assert_eq!(bad.status.code(), Some(1));
}
