use std::path::Path;
use std::process::{Command, Output};

fn papertag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_papertag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = papertag(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) {
    ok(&["synth", "--out", dir.to_str().unwrap(), "--papers", "100", "--labels", "20", "--seed", "4"]);
}

fn common_args(dir: &Path, out: &str) -> Vec<String> {
    vec![
        "--corpus".into(),
        dir.join("corpus.jsonl").display().to_string(),
        "--labels".into(),
        dir.join("labels.jsonl").display().to_string(),
        "--out".into(),
        dir.join(out).display().to_string(),
        "--tuples".into(),
        "200".into(),
    ]
}

fn with<'a>(head: &[&'a str], rest: &'a [String]) -> Vec<&'a str> {
    head.iter().copied().chain(rest.iter().map(String::as_str)).collect()
}

#[test]
fn separate_stage_processes_match_run_all() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let staged = common_args(dir.path(), "staged");
    for stage in [
        "ingest",
        "candidates",
        "sample-tuples",
        "train-encoder",
        "score",
        "self-train",
        "predict",
    ] {
        ok(&with(&[stage], &staged));
    }
    let staged_metrics = ok(&with(&["evaluate"], &staged));
    let whole = common_args(dir.path(), "whole");
    let whole_metrics = ok(&with(&["run-all"], &whole));

    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("predictions.jsonl")).unwrap();
    assert_eq!(read("staged"), read("whole"));
    assert_eq!(staged_metrics, whole_metrics);
    let parsed: serde_json::Value = serde_json::from_str(&whole_metrics).unwrap();
    assert!(parsed["scores"]["P@1"].as_f64().unwrap() > 0.5);
    assert!(dir.path().join("whole/metrics.csv").exists());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let one = common_args(dir.path(), "one");
    let three = common_args(dir.path(), "three");
    ok(&with(&["--threads", "1", "run-all"], &one));
    ok(&with(&["run-all", "--threads", "3"], &three));
    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("predictions.jsonl")).unwrap();
    assert_eq!(read("one"), read("three"));
}

#[test]
fn failing_stage_exits_nonzero_and_names_itself() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let args = common_args(dir.path(), "empty");
    let out = papertag(&with(&["score"], &args));
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stage `score` failed"), "{stderr}");

    let out = papertag(&["ingest", "--corpus", "/nonexistent/corpus.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `ingest` failed"));
}

#[test]
fn config_command_reflects_overrides() {
    let toml = ok(&["config", "--seed", "42", "--no-self-train", "--top-k", "6", "--meta-path", "P->P"]);
    assert!(toml.contains("seed = 42"), "{toml}");
    assert!(toml.contains("top_k = 6"), "{toml}");
    assert!(toml.contains("P->P"), "{toml}");
    let out = papertag(&["config", "--top-k", "2"]);
    assert!(!out.status.success());
}
