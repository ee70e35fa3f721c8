// SPDX-License-Identifier: MIT OR Apache-2.0

//! Three-way grading, volumetric-error flagging and aggregation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bench::{GroundTruth, Target, TaskInstance};
use crate::parse::Parsed;
use crate::scene::Scene;
use crate::swap::{self, SwapPair, VolumetricCheck};
use crate::task::TaskId;

/// Lowercase, trim, collapse internal whitespace, drop one leading article.
pub fn normalize(label: &str) -> String {
    let lowered = label.to_lowercase();
    let mut words: Vec<&str> = lowered.split_whitespace().collect();
    if words.len() > 1 && matches!(words[0], "a" | "an" | "the") {
        words.remove(0);
    }
    words.join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grade {
    Correct,
    Incorrect,
    Hallucinated,
}

/// Grade plus the first volumetric-violation step of a proposed plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeDetail {
    pub grade: Grade,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volumetric_violation: Option<usize>,
}

/// How multi-swap plans other than the canonical one are judged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T6Mode {
    /// Any collision-free plan of the ground-truth length reaching the target.
    #[default]
    MinimalValid,
    /// Any collision-free plan reaching the target.
    AnyValid,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringConfig {
    #[serde(default)]
    pub t6_mode: T6Mode,
}

fn detail(grade: Grade) -> GradeDetail {
    GradeDetail {
        grade,
        volumetric_violation: None,
    }
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v.dedup();
    v
}

/// Grades one parsed response. `scene` enables geometric checks for T5/T6;
/// without it T6 plans are compared against the canonical plan only.
pub fn grade(
    instance: &TaskInstance,
    scene: Option<&Scene>,
    parsed: &Parsed,
    cfg: &ScoringConfig,
) -> GradeDetail {
    let inventory: Vec<String> = instance.inventory.iter().map(|l| normalize(l)).collect();
    if parsed
        .mentioned()
        .iter()
        .any(|l| !inventory.iter().any(|i| i == l))
    {
        return detail(Grade::Hallucinated);
    }
    let gt = &instance.ground_truth;
    let verdict = |ok: bool| if ok { Grade::Correct } else { Grade::Incorrect };
    match (instance.task, parsed) {
        (TaskId::T1 | TaskId::T3 | TaskId::T4, Parsed::Labels { labels }) => match gt {
            GroundTruth::Labels { labels: want } => {
                let want = sorted(want.iter().map(|l| normalize(l)).collect());
                detail(verdict(sorted(labels.clone()) == want))
            }
            _ => detail(Grade::Incorrect),
        },
        (TaskId::T2, Parsed::Labels { labels }) => match gt {
            GroundTruth::Ordered { labels: want } => {
                let want: Vec<String> = want.iter().map(|l| normalize(l)).collect();
                detail(verdict(*labels == want))
            }
            _ => detail(Grade::Incorrect),
        },
        (TaskId::T5 | TaskId::T6, Parsed::Pairs { pairs }) => grade_plan(instance, scene, pairs, cfg),
        (TaskId::T6, Parsed::Infeasible) => detail(verdict(*gt == GroundTruth::Infeasible)),
        _ => detail(Grade::Incorrect),
    }
}

fn to_scene_labels(scene: &Scene, pairs: &[SwapPair]) -> Option<Vec<SwapPair>> {
    let find = |l: &str| {
        scene
            .objects
            .iter()
            .find(|o| normalize(&o.label) == l)
            .map(|o| o.label.clone())
    };
    pairs
        .iter()
        .map(|p| Some(SwapPair(find(&p.0)?, find(&p.1)?)))
        .collect()
}

fn grade_plan(
    instance: &TaskInstance,
    scene: Option<&Scene>,
    pairs: &[SwapPair],
    cfg: &ScoringConfig,
) -> GradeDetail {
    let Some(scene) = scene else {
        let grade = match (&instance.ground_truth, pairs) {
            (GroundTruth::Swap { pair }, [p]) => pair.same_as(p),
            (GroundTruth::Plan { swaps }, ps) => {
                swaps.len() == ps.len() && swaps.iter().zip(ps).all(|(a, b)| a.same_as(b))
            }
            _ => false,
        };
        return detail(if grade { Grade::Correct } else { Grade::Incorrect });
    };
    let Some(plan) = to_scene_labels(scene, pairs) else {
        return detail(Grade::Hallucinated);
    };
    let violation = match swap::check_volumetric(scene, &plan) {
        Ok(VolumetricCheck::Violation { step }) => Some(step),
        Ok(VolumetricCheck::Ok) => None,
        // self-swaps name valid labels but are not swaps
        Err(_) => {
            return detail(Grade::Incorrect);
        }
    };
    let reaches = match &instance.target {
        Target::Order { labels } => swap::order_after(scene, &plan).is_ok_and(|o| o == *labels),
        _ => false,
    };
    let correct = violation.is_none()
        && reaches
        && match &instance.ground_truth {
            GroundTruth::Swap { .. } => plan.len() == 1,
            GroundTruth::Plan { swaps } => match cfg.t6_mode {
                T6Mode::MinimalValid => plan.len() == swaps.len(),
                T6Mode::AnyValid => !plan.is_empty(),
            },
            _ => false,
        };
    GradeDetail {
        grade: if correct { Grade::Correct } else { Grade::Incorrect },
        volumetric_violation: violation,
    }
}

/// One graded response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub instance_id: String,
    pub model: String,
    pub task: TaskId,
    #[serde(flatten)]
    pub detail: GradeDetail,
}

/// Per (model, task) aggregate. Percentages are in [0, 100].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model: String,
    pub task: TaskId,
    pub n: usize,
    pub correct: usize,
    pub hallucinated: usize,
    pub volumetric_errors: usize,
    pub accuracy_pct: f64,
    /// Wilson 95% interval half-width.
    pub ci_half_width_pct: f64,
    pub hallucination_rate_pct: f64,
    /// Planning tasks only.
    pub volumetric_rate_pct: Option<f64>,
}

pub const Z_95: f64 = 1.959_963_984_540_054;

/// Half-width of the Wilson score interval for `k` successes out of `n`.
pub fn wilson_half_width(k: usize, n: usize, z: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n)
}

fn pct(k: usize, n: usize) -> f64 {
    100.0 * k as f64 / n as f64
}

/// Aggregates by (model, task), rows sorted by model then task.
pub fn aggregate(records: &[GradeRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(&str, TaskId), [usize; 4]> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.model.as_str(), r.task)).or_default();
        g[0] += 1;
        g[1] += usize::from(r.detail.grade == Grade::Correct);
        g[2] += usize::from(r.detail.grade == Grade::Hallucinated);
        g[3] += usize::from(r.detail.volumetric_violation.is_some());
    }
    groups
        .into_iter()
        .map(|((model, task), [n, correct, hallucinated, vol])| AggregateRow {
            model: model.into(),
            task,
            n,
            correct,
            hallucinated,
            volumetric_errors: vol,
            accuracy_pct: pct(correct, n),
            ci_half_width_pct: 100.0 * wilson_half_width(correct, n, Z_95),
            hallucination_rate_pct: pct(hallucinated, n),
            volumetric_rate_pct: task.is_planning().then(|| pct(vol, n)),
        })
        .collect()
}

/// Deterministic stand-in models for end-to-end checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Responder {
    /// Answers with the ground truth.
    Oracle,
    /// Lists every scene label.
    Catalogue,
    /// Names one object that is not in the scene.
    Fabricator,
}

impl Responder {
    pub fn name(self) -> &'static str {
        match self {
            Responder::Oracle => "oracle",
            Responder::Catalogue => "catalogue",
            Responder::Fabricator => "fabricator",
        }
    }

    pub fn respond(self, instance: &TaskInstance) -> String {
        match self {
            Responder::Oracle => match &instance.ground_truth {
                GroundTruth::Labels { labels } | GroundTruth::Ordered { labels } => labels.join(", "),
                GroundTruth::Swap { pair } => format!("Swap the {} and the {}.", pair.0, pair.1),
                GroundTruth::Plan { swaps } => swaps
                    .iter()
                    .enumerate()
                    .map(|(k, p)| format!("{}. swap {} and {}", k + 1, p.0, p.1))
                    .collect::<Vec<_>>()
                    .join("\n"),
                GroundTruth::Infeasible => "Infeasible: no sequence of swaps reaches this order.".into(),
            },
            Responder::Catalogue => instance.inventory.join(", "),
            Responder::Fabricator => {
                let mut fake = String::from("glass unicorn");
                while instance.inventory.iter().any(|l| normalize(l) == fake) {
                    fake.push_str(" statue");
                }
                if instance.task.is_planning() {
                    format!("{fake} and {}", instance.inventory[0])
                } else {
                    fake
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize("The Flower Pot "), "flower pot");
        assert_eq!(normalize("flower  pot"), "flower pot");
        assert_ne!(normalize("flowerpot"), normalize("flower pot"));
        assert_eq!(normalize("a"), "a");
    }

    #[test]
    fn wilson_matches_closed_form() {
        assert_eq!(wilson_half_width(0, 0, Z_95), 0.0);
        let hw = wilson_half_width(139, 602, Z_95);
        assert!((hw - 0.03359).abs() < 2e-4, "{hw}");
        // all-correct still has positive width
        assert!(wilson_half_width(10, 10, Z_95) > 0.0);
    }

    fn inst(task: TaskId, gt: GroundTruth) -> TaskInstance {
        TaskInstance {
            id: "t1-00001".into(),
            task,
            scene_id: "scene-t1-00001".into(),
            target: Target::Object {
                id: 0,
                label: "crate".into(),
            },
            prompt: String::new(),
            ground_truth: gt,
            inventory: vec!["crate".into(), "a".into(), "b".into(), "c".into()],
        }
    }

    fn labels(ls: &[&str]) -> Parsed {
        Parsed::Labels {
            labels: ls.iter().map(|s| String::from(*s)).collect(),
        }
    }

    #[test]
    fn rubric_examples() {
        let cfg = ScoringConfig::default();
        let gt = GroundTruth::Labels {
            labels: vec!["a".into(), "b".into(), "c".into()],
        };
        let t1 = inst(TaskId::T1, gt);
        assert_eq!(grade(&t1, None, &labels(&["a", "b"]), &cfg).grade, Grade::Incorrect);
        assert_eq!(grade(&t1, None, &labels(&["c", "a", "b"]), &cfg).grade, Grade::Correct);
        assert_eq!(
            grade(&t1, None, &labels(&["a", "unicorn"]), &cfg).grade,
            Grade::Hallucinated
        );
        let t2 = inst(
            TaskId::T2,
            GroundTruth::Ordered {
                labels: vec!["a".into(), "b".into()],
            },
        );
        assert_eq!(grade(&t2, None, &labels(&["a", "b"]), &cfg).grade, Grade::Correct);
        assert_eq!(grade(&t2, None, &labels(&["b", "a"]), &cfg).grade, Grade::Incorrect);
    }

    #[test]
    fn aggregate_counts() {
        let mk = |grade, vol| GradeRecord {
            instance_id: "x".into(),
            model: "m".into(),
            task: TaskId::T6,
            detail: GradeDetail {
                grade,
                volumetric_violation: vol,
            },
        };
        let mut recs: Vec<GradeRecord> = (0..49).map(|_| mk(Grade::Correct, None)).collect();
        recs.push(mk(Grade::Incorrect, Some(0)));
        let rows = aggregate(&recs);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n, 50);
        assert!((rows[0].accuracy_pct - 98.0).abs() < 1e-12);
        assert_eq!(rows[0].volumetric_rate_pct, Some(2.0));
    }
}
