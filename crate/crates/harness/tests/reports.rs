// SPDX-License-Identifier: MIT OR Apache-2.0

//! Report layouts on fixed fixtures.

mod common;

use std::fs;

use spatialcf::bundle_io;
use spatialcf::evaluate::{self, ScoreOutcome};
use spatialcf::report::{self, ReportManifest};
use spatialcf_core::score::{aggregate, Grade, GradeDetail, GradeRecord};
use spatialcf_core::TaskId;

fn records(model: &str, task: TaskId, n: usize, correct: usize, hallucinated: usize, volumetric: usize) -> Vec<GradeRecord> {
    (0..n)
        .map(|k| GradeRecord {
            instance_id: format!("{}-{k:05}", task.as_str().to_lowercase()),
            model: model.into(),
            task,
            detail: GradeDetail {
                grade: if k < correct {
                    Grade::Correct
                } else if k < correct + hallucinated {
                    Grade::Hallucinated
                } else {
                    Grade::Incorrect
                },
                volumetric_violation: (k >= n - volumetric).then_some(0),
            },
        })
        .collect()
}

fn fixture() -> ScoreOutcome {
    let mut grades = Vec::new();
    grades.extend(records("model-a", TaskId::T1, 602, 139, 12, 0));
    grades.extend(records("model-a", TaskId::T5, 602, 300, 0, 12));
    grades.extend(records("model-a", TaskId::T6, 300, 30, 3, 30));
    grades.extend(records("model-b", TaskId::T1, 602, 602, 0, 0));
    let rows = aggregate(&grades);
    ScoreOutcome {
        grades,
        rows,
        ..ScoreOutcome::default()
    }
}

#[test]
fn accuracy_table_layout() {
    let md = report::accuracy_table(&fixture().rows);
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(lines[0], "| Model | T1 | T5 | T6 |");
    assert_eq!(lines[1], "|---|---:|---:|---:|");
    assert_eq!(lines[2], "| model-a | 23.09 ± 3.36 | 49.83 ± 3.98 | 10.00 ± 3.41 |");
    assert_eq!(lines[3], "| model-b | 100.00 ± 0.32 | - | - |");
    assert_eq!(lines.len(), 4);
}

#[test]
fn volumetric_table_covers_planning_tasks_only() {
    let md = report::volumetric_table(&fixture().rows);
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(lines[0], "| Model | T5 | T6 |");
    assert_eq!(lines[2], "| model-a | 1.99 | 10.00 |");
    assert_eq!(lines[3], "| model-b | - | - |");
}

#[test]
fn hallucination_table_layout() {
    let md = report::hallucination_table(&fixture().rows);
    assert!(md.lines().any(|l| l == "| model-a | 1.99 | 0.00 | 1.00 |"), "{md}");
}

#[test]
fn scores_csv_has_one_row_per_model_and_task() {
    let csv = String::from_utf8(report::scores_csv(&fixture().rows)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "model,task,n,correct,hallucinated,volumetric_errors,accuracy_pct,ci_half_width_pct,hallucination_rate_pct,volumetric_rate_pct"
    );
    assert_eq!(lines[1], "model-a,T1,602,139,12,0,23.09,3.36,1.99,");
    assert_eq!(lines[3], "model-a,T6,300,30,3,30,10.00,3.41,1.00,10.00");
    assert_eq!(lines.len(), 5);
}

#[test]
fn score_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = ReportManifest::new("score", 1, "abc".into());
    report::write_score_report(dir.path(), &fixture(), &m).unwrap();
    for f in ["scores.csv", "scores.json", "grades.jsonl", "report.md", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let md = fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("## Accuracy (%)") && md.contains("## Volumetric-feasibility errors (%)"));
    let grades = fs::read_to_string(dir.path().join("grades.jsonl")).unwrap();
    assert_eq!(grades.lines().count(), 602 * 3 + 300);
}

#[test]
fn mech_report_files_and_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let bundles = dir.path().join("bundles");
    for b in common::dispersed_bundles(5, 21) {
        bundle_io::write_bundle(&bundles, &b).unwrap();
    }
    let traces = dir.path().join("traces.jsonl");
    bundle_io::write_traces(&traces, &common::v_shape_traces(30, 22).0).unwrap();
    let out = evaluate::mech(Some(&bundles), Some(&traces), 5, true).unwrap();
    let rep = dir.path().join("report");
    report::write_mech_report(&rep, &out, &ReportManifest::new("mech", 5, String::new())).unwrap();

    let read = |f: &str| fs::read_to_string(rep.join(f)).unwrap();
    let modes = read("dgar_modes.csv");
    let row: Vec<&str> = modes.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..9], ["T1", "5", "0", "0", "0", "5", "0.00", "0.00", "100.00"]);
    assert_eq!(read("dgar_examples.csv").lines().count(), 6);
    assert_eq!(read("dgar_layers.csv").lines().count(), 1 + 7);
    assert_eq!(read("dgar_layer_head.csv").lines().count(), 1 + 7 * 4);
    assert_eq!(read("recovery.csv").lines().count(), 1 + 17);
    let ground = read("groundedness.csv");
    assert_eq!(ground.lines().nth(1).unwrap(), "T1,A,31,30,0,1");
    assert!(read("mech.md").contains("| V0 |"));
}

#[test]
fn empty_mech_inputs_write_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = evaluate::MechOutcome::default();
    report::write_mech_report(dir.path(), &out, &ReportManifest::new("mech", 0, String::new())).unwrap();
    let modes = fs::read_to_string(dir.path().join("dgar_modes.csv")).unwrap();
    assert_eq!(modes.lines().count(), 1);
    assert!(modes.starts_with("task,scored,excluded,"));
}
