use std::path::Path;
use std::process::{Command, Output};

fn vdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdt")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn thrust_query() {
    let o = vdt(&["thrust", "--inflow", "10"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "60.9000");
}

#[test]
fn negative_inflow_is_an_input_error() {
    let o = vdt(&["thrust", "--inflow", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("-1"));
}

#[test]
fn missing_dataset_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").display().to_string();
    let o = vdt(&["fuse", "--hf", "/nonexistent/hf.csv", "--lf", "/nonexistent/lf.csv", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists(), "no output on input errors");
}

#[test]
fn bad_database_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("junk.json"), "{").unwrap();
    let db = dir.path().display().to_string();
    let out = dir.path().join("sim").display().to_string();
    let o = vdt(&["simulate", "--square", "20", "2", "10", "--db", &db, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn emulate_then_fuse_writes_database_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).display().to_string();
    assert!(vdt(&["emulate", "--out", &p("data"), "--hf-samples", "10", "--lf-samples", "60", "--holdout", "0"])
        .status
        .success());
    let m = manifest(&dir.path().join("data"));
    assert_eq!(m["command"], "emulate");
    assert_eq!(m["seed"], 2024);
    assert!(m["artifacts"]["hf.csv"].as_str().is_some_and(|h| h.len() == 64));

    let o = vdt(&["fuse", "--lf-only", "--lf", &p("data/lf_avl.csv"), "--out", &p("avl")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&dir.path().join("avl"));
    assert_eq!(m["command"], "fuse");
    assert!(m["artifacts"].as_object().unwrap().keys().any(|k| k.starts_with("db/")));
    assert!(m.get("timestamp").is_none());
}

#[test]
fn short_teleop_session_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = vdt(&["teleop", "--duration", "5", "--delay", "0.1", "--out", &out.display().to_string()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("sends 150"));
    for f in ["digital.jsonl", "physical.jsonl", "sends.jsonl", "report.json", "metrics.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(manifest(&out)["command"], "teleop");
}

#[test]
fn resume_before_kill_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t").display().to_string();
    let o = vdt(&["teleop", "--duration", "5", "--kill-at", "3", "--resume-at", "2", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
}
