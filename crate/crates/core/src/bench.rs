// SPDX-License-Identifier: MIT OR Apache-2.0

//! Task instances and their construction from seeded scene drafts.
//!
//! Every draft that does not become an instance is recorded with a
//! [`RejectionReason`], so `drafts == rejections + emitted` holds for every
//! call to [`build_instance`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gen::{
    sample_occlusion_scene_tallied, sample_planning_scene_tallied,
    sample_reflection_scene_tallied, GenConfig, GenError, NounPool, PlanningKind, SceneTemplate,
    OCCLUSION_TEMPLATES, REFLECTION_TEMPLATES,
};
use crate::occlusion::GateReason;
use crate::scene::{Scene, SceneRaster};
use crate::swap::{self, SwapPair, T6Outcome};
use crate::task::TaskId;
use crate::truth;

/// Why a draft was discarded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    TooFewNodes,
    FlatGradient,
    DepthBand,
    DepthTie,
    OutOfFrame,
    ChainBreak,
    PlacementFailed,
    ReflectionHidden,
    InitialOverlap,
    NoT1Target,
    NoT2Target,
    NoT3Target,
    T5NoSwap,
    T5Ambiguous,
    T6TooShort,
    T6Ambiguous,
    T6InfeasibleQuota,
}

impl RejectionReason {
    pub const ALL: [RejectionReason; 17] = [
        RejectionReason::TooFewNodes,
        RejectionReason::FlatGradient,
        RejectionReason::DepthBand,
        RejectionReason::DepthTie,
        RejectionReason::OutOfFrame,
        RejectionReason::ChainBreak,
        RejectionReason::PlacementFailed,
        RejectionReason::ReflectionHidden,
        RejectionReason::InitialOverlap,
        RejectionReason::NoT1Target,
        RejectionReason::NoT2Target,
        RejectionReason::NoT3Target,
        RejectionReason::T5NoSwap,
        RejectionReason::T5Ambiguous,
        RejectionReason::T6TooShort,
        RejectionReason::T6Ambiguous,
        RejectionReason::T6InfeasibleQuota,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectionReason::TooFewNodes => "too_few_nodes",
            RejectionReason::FlatGradient => "flat_gradient",
            RejectionReason::DepthBand => "depth_band",
            RejectionReason::DepthTie => "depth_tie",
            RejectionReason::OutOfFrame => "out_of_frame",
            RejectionReason::ChainBreak => "chain_break",
            RejectionReason::PlacementFailed => "placement_failed",
            RejectionReason::ReflectionHidden => "reflection_hidden",
            RejectionReason::InitialOverlap => "initial_overlap",
            RejectionReason::NoT1Target => "no_t1_target",
            RejectionReason::NoT2Target => "no_t2_target",
            RejectionReason::NoT3Target => "no_t3_target",
            RejectionReason::T5NoSwap => "t5_no_swap",
            RejectionReason::T5Ambiguous => "t5_ambiguous",
            RejectionReason::T6TooShort => "t6_too_short",
            RejectionReason::T6Ambiguous => "t6_ambiguous",
            RejectionReason::T6InfeasibleQuota => "t6_infeasible_quota",
        }
    }
}

impl From<GateReason> for RejectionReason {
    fn from(r: GateReason) -> Self {
        match r {
            GateReason::TooFewNodes => RejectionReason::TooFewNodes,
            GateReason::FlatGradient => RejectionReason::FlatGradient,
            GateReason::DepthBand => RejectionReason::DepthBand,
        }
    }
}

/// What the prompt is about.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// T1–T3 query object.
    Object { id: usize, label: String },
    /// T4 objects whose reflections are removed.
    Removal { ids: [usize; 2], labels: [String; 2] },
    /// T5/T6 desired left-to-right order.
    Order { labels: Vec<String> },
}

/// Canonical answer payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    /// Unordered set, stored sorted (T1, T3, T4).
    Labels { labels: Vec<String> },
    /// Ordered list (T2).
    Ordered { labels: Vec<String> },
    /// Single swap, labels in lexicographic order (T5).
    Swap { pair: SwapPair },
    /// Shortest swap sequence (T6).
    Plan { swaps: Vec<SwapPair> },
    /// No feasible sequence exists (T6).
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub task: TaskId,
    pub scene_id: String,
    pub target: Target,
    pub prompt: String,
    pub ground_truth: GroundTruth,
    /// Scene labels in object-id order.
    pub inventory: Vec<String>,
}

/// An instance together with the scene it was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct Emitted {
    pub instance: TaskInstance,
    pub scene: Scene,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DraftOutcome {
    pub rejections: Vec<RejectionReason>,
    pub emitted: Option<Emitted>,
}

impl DraftOutcome {
    pub fn drafts(&self) -> usize {
        self.rejections.len() + usize::from(self.emitted.is_some())
    }
}

/// Canonical instance id, e.g. `t1-00042`.
pub fn instance_id(task: TaskId, index: usize) -> String {
    format!("{}-{:05}", task.as_str().to_ascii_lowercase(), index)
}

/// Seed for instance `index` of `task` under a master seed.
pub fn instance_seed(master: u64, task: TaskId, index: usize) -> u64 {
    crate::mix_seed(crate::mix_seed(master, task as u64 + 1), index as u64)
}

fn pick<R: Rng>(rng: &mut R, items: &[usize]) -> Option<usize> {
    if items.is_empty() {
        None
    } else {
        Some(items[rng.gen_range(0..items.len())])
    }
}

/// Result of deriving one task from one scene draft.
enum Derived {
    Ok(Target, GroundTruth),
    Reject(RejectionReason),
}

fn derive_occlusion<R: Rng>(task: TaskId, scene: &Scene, rng: &mut R) -> Derived {
    let Ok(raster) = SceneRaster::new(scene) else {
        return Derived::Reject(RejectionReason::OutOfFrame);
    };
    let n = scene.objects.len();
    let answer = |x: usize| match task {
        TaskId::T1 => truth::derive_t1(&raster, x).map(|l| GroundTruth::Labels { labels: l }),
        TaskId::T2 => truth::derive_t2(&raster, x).map(|l| GroundTruth::Ordered { labels: l }),
        _ => truth::derive_t3(&raster, x).map(|l| GroundTruth::Labels { labels: l }),
    };
    let candidates: Vec<usize> = (0..n).filter(|&x| answer(x).is_ok()).collect();
    match pick(rng, &candidates) {
        Some(x) => {
            let gt = answer(x).expect("candidate derivation succeeded above");
            let label = scene.objects[x].label.clone();
            Derived::Ok(Target::Object { id: x, label }, gt)
        }
        None => Derived::Reject(match task {
            TaskId::T1 => RejectionReason::NoT1Target,
            TaskId::T2 => RejectionReason::NoT2Target,
            _ => RejectionReason::NoT3Target,
        }),
    }
}

/// Draws scenes for instance `index` of `task` until one yields a valid
/// instance or the outer budget (`cfg.draft_budget` scenes) runs out.
pub fn build_instance(
    task: TaskId,
    index: usize,
    master_seed: u64,
    pool: &NounPool,
    cfg: &GenConfig,
) -> Result<DraftOutcome, GenError> {
    cfg.validate()?;
    let seed = instance_seed(master_seed, task, index);
    let mut rejections = Vec::new();
    for attempt in 0..cfg.draft_budget {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, attempt as u64));
        let scene_seed: u64 = rng.gen();
        let sampled = match task {
            TaskId::T1 | TaskId::T2 | TaskId::T3 => {
                let idx = rng.gen_range(1..=OCCLUSION_TEMPLATES.len()) as u8;
                let template = SceneTemplate::occlusion(idx)?.with_objects(cfg.occlusion_objects);
                sample_occlusion_scene_tallied(&template, scene_seed, pool, cfg, &mut rejections)
                    .map(|s| {
                        let d = derive_occlusion(task, &s, &mut rng);
                        (s, d)
                    })
            }
            TaskId::T4 => {
                let idx = rng.gen_range(1..=REFLECTION_TEMPLATES.len()) as u8;
                let template = SceneTemplate::reflection(idx)?;
                sample_reflection_scene_tallied(&template, scene_seed, pool, cfg, &mut rejections)
                    .map(|(s, pair)| {
                        let d = match truth::derive_t4(&s, &pair, cfg.min_reflection_pixels) {
                            Ok(labels) => Derived::Ok(
                                Target::Removal {
                                    ids: pair,
                                    labels: pair.map(|i| s.objects[i].label.clone()),
                                },
                                GroundTruth::Labels { labels },
                            ),
                            Err(_) => Derived::Reject(RejectionReason::ReflectionHidden),
                        };
                        (s, d)
                    })
            }
            TaskId::T5 | TaskId::T6 => {
                let idx = rng.gen_range(1..=OCCLUSION_TEMPLATES.len()) as u8;
                let template = SceneTemplate::occlusion(idx)?;
                let kind = if task == TaskId::T5 {
                    PlanningKind::SingleSwap
                } else {
                    PlanningKind::MultiSwap
                };
                sample_planning_scene_tallied(&template, scene_seed, pool, cfg, kind, 4, &mut rejections)
                    .map(|(s, order)| {
                        let d = derive_planning(task, &s, order);
                        (s, d)
                    })
            }
        };
        let (scene, derived) = match sampled {
            Ok(v) => v,
            Err(GenError::BudgetExhausted(_)) => continue,
            Err(e) => return Err(e),
        };
        match derived {
            Derived::Reject(r) => rejections.push(r),
            Derived::Ok(target, ground_truth) => {
                let id = instance_id(task, index);
                let prompt = crate::prompt::render(task, &target)
                    .expect("targets built here always bind every placeholder");
                let instance = TaskInstance {
                    scene_id: format!("scene-{id}"),
                    id,
                    task,
                    target,
                    prompt,
                    ground_truth,
                    inventory: scene.labels(),
                };
                return Ok(DraftOutcome {
                    rejections,
                    emitted: Some(Emitted { instance, scene }),
                });
            }
        }
    }
    Ok(DraftOutcome {
        rejections,
        emitted: None,
    })
}

fn derive_planning(task: TaskId, scene: &Scene, order: Vec<String>) -> Derived {
    let gt = if task == TaskId::T5 {
        match swap::solve_t5(scene, &order) {
            Ok(pair) => GroundTruth::Swap { pair },
            Err(_) => return Derived::Reject(RejectionReason::T5NoSwap),
        }
    } else {
        match swap::solve_t6(scene, &order) {
            Ok(T6Outcome::Unique(swaps)) if swaps.len() >= 2 => GroundTruth::Plan { swaps },
            Ok(T6Outcome::Infeasible) => GroundTruth::Infeasible,
            Ok(T6Outcome::Ambiguous { .. }) => return Derived::Reject(RejectionReason::T6Ambiguous),
            _ => return Derived::Reject(RejectionReason::T6TooShort),
        }
    };
    Derived::Ok(Target::Order { labels: order }, gt)
}

/// Re-derives the ground truth of an existing (task, scene, target)
/// triple, as generation would have.
pub fn derive_ground_truth(
    task: TaskId,
    scene: &Scene,
    target: &Target,
    cfg: &GenConfig,
) -> Result<GroundTruth, DeriveError> {
    let gt = match (task, target) {
        (TaskId::T1 | TaskId::T2 | TaskId::T3, Target::Object { id, .. }) => {
            let raster = SceneRaster::new(scene)
                .map_err(|_| DeriveError::Rejected(RejectionReason::OutOfFrame))?;
            let reject = match task {
                TaskId::T1 => RejectionReason::NoT1Target,
                TaskId::T2 => RejectionReason::NoT2Target,
                _ => RejectionReason::NoT3Target,
            };
            let gt = match task {
                TaskId::T1 => truth::derive_t1(&raster, *id).map(|l| GroundTruth::Labels { labels: l }),
                TaskId::T2 => truth::derive_t2(&raster, *id).map(|l| GroundTruth::Ordered { labels: l }),
                _ => truth::derive_t3(&raster, *id).map(|l| GroundTruth::Labels { labels: l }),
            };
            gt.map_err(|_| reject)
        }
        (TaskId::T4, Target::Removal { ids, .. }) => truth::derive_t4(scene, ids, cfg.min_reflection_pixels)
            .map(|labels| GroundTruth::Labels { labels })
            .map_err(|_| RejectionReason::ReflectionHidden),
        (TaskId::T5 | TaskId::T6, Target::Order { labels }) => {
            match derive_planning(task, scene, labels.clone()) {
                Derived::Ok(_, gt) => Ok(gt),
                Derived::Reject(r) => Err(r),
            }
        }
        _ => return Err(DeriveError::TargetMismatch(task)),
    };
    gt.map_err(DeriveError::Rejected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DeriveError {
    #[error("target kind does not fit task {0}")]
    TargetMismatch(TaskId),
    #[error("scene no longer supports the target: {}", .0.as_str())]
    Rejected(RejectionReason),
}
