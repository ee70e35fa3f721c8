// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatialcf"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = bin(args, cwd);
    assert!(
        out.status.success(),
        "{args:?}: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    bin(args, cwd).status.code().unwrap()
}

const CONFIG: &str = "[generate]\ncounts = { T1 = 3, T2 = 3, T3 = 3, T4 = 3, T5 = 3, T6 = 3 }\n";

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    ok(&["--config", "run.toml", "generate", "--out", "data", "--seed", "7"], dir.path());
    dir
}

fn scores(dir: &Path, report: &str) -> Vec<Value> {
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join(report).join("scores.json")).unwrap()).unwrap();
    v["rows"].as_array().unwrap().clone()
}

#[test]
fn generate_derive_query_score() {
    let dir = setup();
    let d = dir.path();
    let manifest: Value = serde_json::from_str(&fs::read_to_string(d.join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["tasks"]["T6"]["emitted"], 3);

    assert!(ok(&["derive", "--dataset", "data"], d).contains("0 mismatches"));
    ok(&["prompts", "--dataset", "data", "--out", "prompts", "--images"], d);
    assert_eq!(fs::read_dir(d.join("prompts/images")).unwrap().count(), 18);
    assert_eq!(fs::read_dir(d.join("prompts/prompts")).unwrap().count(), 18);

    for r in ["oracle", "catalogue", "fabricator"] {
        ok(&["query", "--dataset", "data", "--responder", r, "--out", &format!("{r}.jsonl")], d);
    }
    ok(
        &["score", "--dataset", "data", "--responses", "oracle.jsonl", "catalogue.jsonl", "fabricator.jsonl", "--out", "report"],
        d,
    );
    let rows = scores(d, "report");
    assert_eq!(rows.len(), 18);
    for row in &rows {
        let (model, acc, hall) = (
            row["model"].as_str().unwrap(),
            row["accuracy_pct"].as_f64().unwrap(),
            row["hallucination_rate_pct"].as_f64().unwrap(),
        );
        match model {
            "oracle" => assert_eq!(acc, 100.0),
            "catalogue" => assert_eq!(acc, 0.0),
            "fabricator" => assert_eq!(hall, 100.0),
            other => panic!("{other}"),
        }
    }
    for f in ["scores.csv", "grades.jsonl", "report.md", "manifest.json"] {
        assert!(d.join("report").join(f).is_file(), "{f}");
    }
    let md = fs::read_to_string(d.join("report/report.md")).unwrap();
    assert!(md.contains("| oracle | 100.00 ±"));
}

#[test]
fn query_limit_and_task_filter() {
    let dir = setup();
    let d = dir.path();
    ok(
        &["query", "--dataset", "data", "--responder", "oracle", "--tasks", "T2,T5", "--limit", "2", "--out", "r.jsonl"],
        d,
    );
    let lines: Vec<Value> = fs::read_to_string(d.join("r.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| {
        let id = l["instance_id"].as_str().unwrap();
        id.starts_with("t2-") || id.starts_with("t5-")
    }));
}

#[test]
fn same_seed_reproduces_every_output() {
    let (a, b) = (setup(), setup());
    for dir in [&a, &b] {
        ok(&["query", "--dataset", "data", "--responder", "catalogue", "--out", "r.jsonl"], dir.path());
        ok(&["score", "--dataset", "data", "--responses", "r.jsonl", "--out", "report"], dir.path());
    }
    for f in ["data/instances.jsonl", "data/manifest.json", "r.jsonl", "report/scores.json", "report/scores.csv", "report/report.md"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn orphans_fail_only_in_strict_mode() {
    let dir = setup();
    let d = dir.path();
    fs::write(
        d.join("orphan.jsonl"),
        "{\"instance_id\": \"t1-99999\", \"model\": \"m\", \"status\": \"answered\", \"raw\": \"mug\"}\n",
    )
    .unwrap();
    ok(&["score", "--dataset", "data", "--responses", "orphan.jsonl", "--out", "lenient"], d);
    let v: Value = serde_json::from_str(&fs::read_to_string(d.join("lenient/scores.json")).unwrap()).unwrap();
    assert_eq!(v["orphans"].as_array().unwrap().len(), 1);
    assert_eq!(code(&["score", "--dataset", "data", "--responses", "orphan.jsonl", "--out", "s", "--strict"], d), 4);
}

#[test]
fn empty_responses_give_an_empty_report() {
    let dir = setup();
    let d = dir.path();
    fs::write(d.join("empty.jsonl"), "").unwrap();
    let out = bin(&["score", "--dataset", "data", "--responses", "empty.jsonl", "--out", "report"], d);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no responses"));
    assert!(scores(d, "report").is_empty());
    assert_eq!(fs::read_to_string(d.join("report/scores.csv")).unwrap().lines().count(), 1);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = setup();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "[generate]\nsede = 1\n").unwrap();
    assert_eq!(code(&["--config", "bad.toml", "generate", "--out", "x"], d), 2);
    assert_eq!(code(&["--config", "missing.toml", "generate", "--out", "x"], d), 2);
    assert_eq!(code(&["derive", "--dataset", "nowhere"], d), 2);
    assert_eq!(code(&["generate"], d), 2);
    assert_eq!(code(&["mech", "--out", "m"], d), 2);

    let path = d.join("data/instances.jsonl");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{not json\n");
    fs::write(&path, text).unwrap();
    assert_eq!(code(&["derive", "--dataset", "data"], d), 3);
}

#[test]
fn tampered_dataset_fails_derive() {
    let dir = setup();
    let d = dir.path();
    let path = d.join("data/instances.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    lines[0]["ground_truth"] = serde_json::json!({"kind": "labels", "labels": ["ghost"]});
    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(&path, body).unwrap();
    assert_eq!(code(&["derive", "--dataset", "data"], d), 3);
}
