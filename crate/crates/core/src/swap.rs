// SPDX-License-Identifier: MIT OR Apache-2.0

//! Collision-aware swap planning over object x positions.
//!
//! A swap exchanges the `x_center` of two objects and leaves every other
//! coordinate alone. Two boxes collide when their x, y and z intervals all
//! overlap with positive length; touching faces are allowed.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scene::{Scene, SceneObject};

/// One pairwise swap, by label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SwapPair(pub String, pub String);

impl SwapPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Self {
        SwapPair(a.into(), b.into())
    }

    /// Labels in lexicographic order.
    pub fn canonical(&self) -> SwapPair {
        if self.0 <= self.1 {
            self.clone()
        } else {
            SwapPair(self.1.clone(), self.0.clone())
        }
    }

    /// Pair equality ignoring order within the pair.
    pub fn same_as(&self, other: &SwapPair) -> bool {
        self.canonical() == other.canonical()
    }
}

/// Ground-truth or proposed plan.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "swaps", rename_all = "snake_case")]
pub enum SwapPlan {
    Swaps(Vec<SwapPair>),
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SwapError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("a swap needs two distinct objects, got `{0}` twice")]
    SelfSwap(String),
    #[error("target order is not a permutation of the scene labels")]
    InvalidTarget,
}

fn overlap_1d(a: [f64; 2], b: [f64; 2]) -> bool {
    a[1].min(b[1]) - a[0].max(b[0]) > 0.0
}

pub fn boxes_overlap(a: &SceneObject, b: &SceneObject) -> bool {
    overlap_1d(a.x_interval(), b.x_interval())
        && overlap_1d(a.y_interval(), b.y_interval())
        && overlap_1d(a.z_interval(), b.z_interval())
}

/// First colliding pair in id order.
pub fn first_overlap(objects: &[SceneObject]) -> Option<(usize, usize)> {
    for i in 0..objects.len() {
        for j in i + 1..objects.len() {
            if boxes_overlap(&objects[i], &objects[j]) {
                return Some((objects[i].id, objects[j].id));
            }
        }
    }
    None
}

fn with_swapped(objects: &[SceneObject], i: usize, j: usize) -> Vec<SceneObject> {
    let mut out = objects.to_vec();
    let (xi, xj) = (out[i].x_center, out[j].x_center);
    out[i].x_center = xj;
    out[j].x_center = xi;
    out
}

/// Whether exchanging the x positions of `i` and `j` leaves all boxes disjoint.
pub fn feasible_swap(scene: &Scene, i: usize, j: usize) -> bool {
    first_overlap(&with_swapped(&scene.objects, i, j)).is_none()
}

fn order_of(objects: &[SceneObject]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..objects.len()).collect();
    ids.sort_by(|&a, &b| {
        objects[a]
            .x_center
            .total_cmp(&objects[b].x_center)
            .then(a.cmp(&b))
    });
    ids
}

fn resolve_target(scene: &Scene, target: &[String]) -> Result<Vec<usize>, SwapError> {
    if target.len() != scene.objects.len() {
        return Err(SwapError::InvalidTarget);
    }
    let mut ids = Vec::with_capacity(target.len());
    for label in target {
        let obj = scene
            .find_label(label)
            .ok_or_else(|| SwapError::UnknownLabel(label.clone()))?;
        if ids.contains(&obj.id) {
            return Err(SwapError::InvalidTarget);
        }
        ids.push(obj.id);
    }
    Ok(ids)
}

fn resolve_label(scene: &Scene, label: &str) -> Result<usize, SwapError> {
    scene
        .find_label(label)
        .map(|o| o.id)
        .ok_or_else(|| SwapError::UnknownLabel(label.into()))
}

/// Object pairs `(i, j)` ordered by (min label, max label).
fn pairs_by_label(scene: &Scene) -> Vec<(usize, usize)> {
    let n = scene.objects.len();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
        }
    }
    let key = |&(i, j): &(usize, usize)| {
        let (a, b) = (&scene.objects[i].label, &scene.objects[j].label);
        if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        }
    };
    pairs.sort_by_key(key);
    pairs
}

fn pair_of(scene: &Scene, i: usize, j: usize) -> SwapPair {
    SwapPair::new(scene.objects[i].label.clone(), scene.objects[j].label.clone()).canonical()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T5Reject {
    /// Target already holds.
    Identity,
    /// No feasible swap reaches the target.
    None,
    /// More than one feasible swap reaches the target.
    Ambiguous,
    InvalidTarget,
}

/// The unique feasible single swap reaching `target` (labels left to right).
pub fn solve_t5(scene: &Scene, target: &[String]) -> Result<SwapPair, T5Reject> {
    let want = resolve_target(scene, target).map_err(|_| T5Reject::InvalidTarget)?;
    if order_of(&scene.objects) == want {
        return Err(T5Reject::Identity);
    }
    let mut found: Option<SwapPair> = None;
    for (i, j) in pairs_by_label(scene) {
        let swapped = with_swapped(&scene.objects, i, j);
        if order_of(&swapped) == want && first_overlap(&swapped).is_none() {
            if found.is_some() {
                return Err(T5Reject::Ambiguous);
            }
            found = Some(pair_of(scene, i, j));
        }
    }
    found.ok_or(T5Reject::None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum T6Outcome {
    /// Exactly one shortest sequence.
    Unique(Vec<SwapPair>),
    /// Several shortest sequences; `canonical` is the first in expansion order.
    Ambiguous { canonical: Vec<SwapPair>, count: u64 },
    Infeasible,
}

impl T6Outcome {
    pub fn shortest_len(&self) -> Option<usize> {
        match self {
            T6Outcome::Unique(p) => Some(p.len()),
            T6Outcome::Ambiguous { canonical, .. } => Some(canonical.len()),
            T6Outcome::Infeasible => None,
        }
    }
}

/// Search statistics, for tests and traces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub states_visited: usize,
}

/// Breadth-first search over assignments of objects to the scene's x
/// positions, edges being feasible swaps.
pub fn solve_t6(scene: &Scene, target: &[String]) -> Result<T6Outcome, SwapError> {
    solve_t6_with_stats(scene, target).map(|(o, _)| o)
}

pub fn solve_t6_with_stats(
    scene: &Scene,
    target: &[String],
) -> Result<(T6Outcome, SearchStats), SwapError> {
    let want = resolve_target(scene, target)?;
    let pairs = pairs_by_label(scene);
    // state: x_center per object id
    let start: Vec<f64> = scene.objects.iter().map(|o| o.x_center).collect();
    let key = |xs: &[f64]| xs.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();

    struct Node {
        xs: Vec<f64>,
        dist: usize,
        paths: u64,
        parent: Option<(usize, (usize, usize))>,
    }
    let mut nodes: Vec<Node> = vec![Node {
        xs: start.clone(),
        dist: 0,
        paths: 1,
        parent: None,
    }];
    let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    index.insert(key(&start), 0);
    let mut queue = VecDeque::from([0usize]);
    let mut objects = scene.objects.clone();
    let mut goal: Option<usize> = None;

    while let Some(cur) = queue.pop_front() {
        if let Some(g) = goal {
            if nodes[cur].dist >= nodes[g].dist {
                break;
            }
        }
        for (o, &x) in objects.iter_mut().zip(&nodes[cur].xs) {
            o.x_center = x;
        }
        if order_of(&objects) == want {
            goal = Some(cur);
            continue;
        }
        for &(i, j) in &pairs {
            let swapped = with_swapped(&objects, i, j);
            if first_overlap(&swapped).is_some() {
                continue;
            }
            let xs: Vec<f64> = swapped.iter().map(|o| o.x_center).collect();
            let k = key(&xs);
            let (dist, paths) = (nodes[cur].dist + 1, nodes[cur].paths);
            match index.get(&k) {
                Some(&existing) => {
                    if nodes[existing].dist == dist {
                        nodes[existing].paths = nodes[existing].paths.saturating_add(paths);
                    }
                }
                None => {
                    index.insert(k, nodes.len());
                    queue.push_back(nodes.len());
                    nodes.push(Node {
                        xs,
                        dist,
                        paths,
                        parent: Some((cur, (i, j))),
                    });
                }
            }
        }
    }
    let stats = SearchStats {
        states_visited: nodes.len(),
    };
    let Some(goal) = goal else {
        return Ok((T6Outcome::Infeasible, stats));
    };
    // Path counts into the goal are final once every node at the previous
    // depth has been expanded, which the early break guarantees.
    let mut plan = Vec::new();
    let mut at = goal;
    while let Some((prev, (i, j))) = nodes[at].parent {
        plan.push(pair_of(scene, i, j));
        at = prev;
    }
    plan.reverse();
    let count = nodes[goal].paths;
    let outcome = if count > 1 {
        T6Outcome::Ambiguous {
            canonical: plan,
            count,
        }
    } else {
        T6Outcome::Unique(plan)
    };
    Ok((outcome, stats))
}

/// Result of replaying a plan against the scene geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolumetricCheck {
    Ok,
    /// First step (0-based) whose post-state has colliding boxes.
    Violation { step: usize },
}

fn apply(scene: &Scene, plan: &[SwapPair]) -> Result<(Vec<SceneObject>, VolumetricCheck), SwapError> {
    let mut objects = scene.objects.clone();
    let mut check = VolumetricCheck::Ok;
    for (step, pair) in plan.iter().enumerate() {
        let i = resolve_label(scene, &pair.0)?;
        let j = resolve_label(scene, &pair.1)?;
        if i == j {
            return Err(SwapError::SelfSwap(pair.0.clone()));
        }
        objects = with_swapped(&objects, i, j);
        if check == VolumetricCheck::Ok && first_overlap(&objects).is_some() {
            check = VolumetricCheck::Violation { step };
        }
    }
    Ok((objects, check))
}

/// Replays `plan` in order and reports the first colliding step.
pub fn check_volumetric(scene: &Scene, plan: &[SwapPair]) -> Result<VolumetricCheck, SwapError> {
    apply(scene, plan).map(|(_, c)| c)
}

/// Left-to-right label order after applying `plan` (collisions ignored).
pub fn order_after(scene: &Scene, plan: &[SwapPair]) -> Result<Vec<String>, SwapError> {
    let (objects, _) = apply(scene, plan)?;
    Ok(order_of(&objects)
        .into_iter()
        .map(|i| objects[i].label.clone())
        .collect())
}
