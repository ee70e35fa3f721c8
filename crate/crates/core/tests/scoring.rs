// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use proptest::prelude::*;
use spatialcf_core::bench::{Emitted, GroundTruth, Target, TaskInstance};
use spatialcf_core::parse::{parse_response, Parsed};
use spatialcf_core::score::{
    aggregate, grade, Grade, GradeDetail, GradeRecord, Responder, ScoringConfig, T6Mode,
};
use spatialcf_core::swap::{self, SwapPair};
use spatialcf_core::TaskId;

fn instance(task: TaskId, gt: GroundTruth, inventory: &[&str]) -> TaskInstance {
    TaskInstance {
        id: format!("{}-00000", task.as_str().to_lowercase()),
        task,
        scene_id: "scene".into(),
        target: Target::Object {
            id: 0,
            label: inventory[0].into(),
        },
        prompt: String::new(),
        ground_truth: gt,
        inventory: inventory.iter().map(|s| s.to_string()).collect(),
    }
}

fn labels(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn grade_text(inst: &TaskInstance, raw: &str) -> Grade {
    grade(inst, None, &parse_response(raw, inst.task), &ScoringConfig::default()).grade
}

const INVENTORY: [&str; 6] = ["lamp", "mug", "vase", "red kettle", "clock", "book"];

#[test]
fn near_miss_is_incorrect_not_partial() {
    let inst = instance(
        TaskId::T1,
        GroundTruth::Labels {
            labels: labels(&["mug", "vase", "clock"]),
        },
        &INVENTORY,
    );
    assert_eq!(grade_text(&inst, "mug, vase"), Grade::Incorrect);
    assert_eq!(grade_text(&inst, "Clock, the Mug and vase."), Grade::Correct);
}

#[test]
fn off_inventory_label_is_hallucinated() {
    let inst = instance(
        TaskId::T3,
        GroundTruth::Labels {
            labels: labels(&["mug"]),
        },
        &INVENTORY,
    );
    assert_eq!(grade_text(&inst, "mug, unicorn"), Grade::Hallucinated);
    assert_eq!(grade_text(&inst, "kettle"), Grade::Hallucinated);
}

#[test]
fn t2_order_matters() {
    let inst = instance(
        TaskId::T2,
        GroundTruth::Ordered {
            labels: labels(&["lamp", "book"]),
        },
        &INVENTORY,
    );
    assert_eq!(grade_text(&inst, "lamp, book"), Grade::Correct);
    assert_eq!(grade_text(&inst, "book, lamp"), Grade::Incorrect);
}

#[test]
fn responders_on_generated_instances() {
    let cfg = ScoringConfig::default();
    for task in TaskId::ALL {
        for e in common::emitted(task, 15, common::MASTER_SEED ^ 5) {
            let inst = &e.instance;
            let run = |r: Responder| {
                grade(inst, Some(&e.scene), &parse_response(&r.respond(inst), task), &cfg).grade
            };
            assert_eq!(run(Responder::Oracle), Grade::Correct, "{}", inst.id);
            assert_eq!(run(Responder::Fabricator), Grade::Hallucinated, "{}", inst.id);
            // scene-free grading agrees for the oracle
            let blind = grade(inst, None, &parse_response(&Responder::Oracle.respond(inst), task), &cfg);
            assert_eq!(blind.grade, Grade::Correct);
            let proper_subset = match &inst.ground_truth {
                GroundTruth::Labels { labels } | GroundTruth::Ordered { labels } => {
                    labels.len() < inst.inventory.len()
                }
                _ => false,
            };
            if proper_subset {
                assert_eq!(run(Responder::Catalogue), Grade::Incorrect, "{}", inst.id);
            }
        }
    }
}

/// A one-step plan that collides, on a generated scene.
fn colliding_plan(task: TaskId) -> Option<(Emitted, Vec<SwapPair>)> {
    for e in common::emitted(task, 40, common::MASTER_SEED ^ 6) {
        let n = e.scene.objects.len();
        for i in 0..n {
            for j in i + 1..n {
                if !swap::feasible_swap(&e.scene, i, j) {
                    let pair = SwapPair::new(
                        e.scene.objects[i].label.clone(),
                        e.scene.objects[j].label.clone(),
                    );
                    return Some((e, vec![pair]));
                }
            }
        }
    }
    None
}

#[test]
fn volumetric_violations_are_recorded() {
    let (e, plan) = colliding_plan(TaskId::T6).expect("some generated scene has a colliding swap");
    let d = grade(
        &e.instance,
        Some(&e.scene),
        &Parsed::Pairs { pairs: plan },
        &ScoringConfig::default(),
    );
    assert_eq!(d.grade, Grade::Incorrect);
    assert_eq!(d.volumetric_violation, Some(0));

    // one planted violation among fifty T6 responses
    let mut records: Vec<GradeRecord> = (0..49)
        .map(|k| GradeRecord {
            instance_id: format!("t6-{k:05}"),
            model: "m".into(),
            task: TaskId::T6,
            detail: GradeDetail {
                grade: Grade::Correct,
                volumetric_violation: None,
            },
        })
        .collect();
    records.push(GradeRecord {
        instance_id: "t6-00049".into(),
        model: "m".into(),
        task: TaskId::T6,
        detail: d,
    });
    let rows = aggregate(&records);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].volumetric_rate_pct, Some(2.0));
    assert_eq!(rows[0].accuracy_pct, 98.0);
}

#[test]
fn aggregate_fixtures() {
    let rec = |k: usize, g: Grade| GradeRecord {
        instance_id: format!("t1-{k:05}"),
        model: "m".into(),
        task: TaskId::T1,
        detail: GradeDetail {
            grade: g,
            volumetric_violation: None,
        },
    };
    let rows = aggregate(&(0..10).map(|k| rec(k, Grade::Correct)).collect::<Vec<_>>());
    assert_eq!(rows[0].accuracy_pct, 100.0);
    assert_eq!(rows[0].volumetric_rate_pct, None);

    let records: Vec<GradeRecord> = (0..602)
        .map(|k| rec(k, if k < 139 { Grade::Correct } else { Grade::Incorrect }))
        .collect();
    let row = &aggregate(&records)[0];
    assert!((row.accuracy_pct - 23.09).abs() < 0.01, "{}", row.accuracy_pct);
    assert!((row.accuracy_pct - 23.01).abs() < 0.1);
    assert!(row.ci_half_width_pct > 3.0 && row.ci_half_width_pct < 3.6);
}

#[test]
fn longer_valid_plans_depend_on_mode() {
    let e = common::emitted(TaskId::T6, 60, common::MASTER_SEED)
        .into_iter()
        .find(|e| matches!(e.instance.ground_truth, GroundTruth::Plan { .. }))
        .expect("a plan instance");
    let GroundTruth::Plan { swaps } = &e.instance.ground_truth else { unreachable!() };
    // swapping the same pair twice is a collision-free no-op
    let mut longer = vec![swaps[0].clone(), swaps[0].clone()];
    longer.extend(swaps.iter().cloned());
    assert_eq!(swap::check_volumetric(&e.scene, &longer).unwrap(), swap::VolumetricCheck::Ok);
    let parsed = Parsed::Pairs { pairs: longer };
    let minimal = grade(&e.instance, Some(&e.scene), &parsed, &ScoringConfig::default());
    assert_eq!(minimal.grade, Grade::Incorrect);
    let any = grade(
        &e.instance,
        Some(&e.scene),
        &parsed,
        &ScoringConfig {
            t6_mode: T6Mode::AnyValid,
        },
    );
    assert_eq!(any.grade, Grade::Correct);
}

proptest! {
    #[test]
    fn adding_an_unknown_label_only_moves_towards_hallucinated(
        picks in proptest::sample::subsequence(INVENTORY.to_vec(), 0..=6),
        want in proptest::sample::subsequence(INVENTORY.to_vec(), 1..=3),
    ) {
        let inst = instance(TaskId::T1, GroundTruth::Labels { labels: labels(&want) }, &INVENTORY);
        let raw = picks.join(", ");
        let base = grade_text(&inst, &raw);
        prop_assert!(base != Grade::Hallucinated);
        let extra = if raw.is_empty() { "unicorn".to_string() } else { format!("{raw}, unicorn") };
        prop_assert_eq!(grade_text(&inst, &extra), Grade::Hallucinated);
        let mut sorted_picks = picks.clone();
        sorted_picks.sort_unstable();
        let mut sorted_want = want.clone();
        sorted_want.sort_unstable();
        prop_assert_eq!(base == Grade::Correct, sorted_picks == sorted_want);
    }

    #[test]
    fn permuting_a_correct_t2_answer_flips_it(order in Just(vec!["lamp", "mug", "vase"]).prop_shuffle()) {
        let inst = instance(TaskId::T2, GroundTruth::Ordered { labels: labels(&["lamp", "mug", "vase"]) }, &INVENTORY);
        let g = grade_text(&inst, &order.join(", "));
        prop_assert_eq!(g == Grade::Correct, order == ["lamp", "mug", "vase"]);
        prop_assert!(g != Grade::Hallucinated);
    }
}
