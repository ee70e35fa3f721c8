// SPDX-License-Identifier: MIT OR Apache-2.0

//! Target / depth-correct / irrelevant token regions and the attention
//! fractions over them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::bundle::{ActivationBundle, BundleError};
use crate::task::TaskId;

pub const DEFAULT_DELTA: f64 = 0.3;

/// Per-side bounding-box expansion of the target region, as a fraction of
/// its size.
pub fn expansion_fraction(task: TaskId) -> Option<f64> {
    match task {
        TaskId::T1 => Some(0.375),
        TaskId::T2 => Some(0.25),
        TaskId::T3 => Some(0.125),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("target mask is empty")]
    EmptyTargetMask,
    #[error("target mask covers no reliable token")]
    NoReliableTarget,
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub target: Vec<usize>,
    pub depth_correct: Vec<usize>,
    pub irrelevant: Vec<usize>,
    /// Median reliable depth under the target mask.
    pub target_depth: f64,
    /// Margin that produced `depth_correct`.
    pub margin: f64,
    /// Whether the adaptive fallback margin was needed.
    pub adaptive: bool,
}

impl RegionPartition {
    pub fn counts(&self) -> [usize; 3] {
        [self.target.len(), self.depth_correct.len(), self.irrelevant.len()]
    }

    pub fn chance(&self) -> f64 {
        let [t, d, i] = self.counts();
        d as f64 / (t + d + i) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// No token satisfied the depth condition, even with the adaptive margin.
    EmptyDepthRegion,
    /// Every (layer, head) cell had zero visual attention.
    NoVisualAttention,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PartitionOutcome {
    Partition(RegionPartition),
    Excluded(ExclusionReason),
}

fn lower_median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

pub fn partition_regions(
    bundle: &ActivationBundle,
    expansion: f64,
) -> Result<PartitionOutcome, PartitionError> {
    bundle.validate()?;
    let grid = bundle.grid;
    if bundle.target_mask.iter().all(|&m| m == 0.0) {
        return Err(PartitionError::EmptyTargetMask);
    }
    let reliable = bundle.reliable_tokens();
    let depths = bundle.token_depths();
    let n = bundle.n_tokens();
    let patch = |t: usize| bundle.token_patch[t] as usize;

    let target: Vec<usize> = (0..n)
        .filter(|&t| reliable[t] && grid.pixels(patch(t)).any(|i| bundle.target_mask[i] != 0.0))
        .collect();
    if target.is_empty() {
        return Err(PartitionError::NoReliableTarget);
    }
    let target_depth = lower_median(
        (0..bundle.target_mask.len())
            .filter(|&i| bundle.target_mask[i] != 0.0 && bundle.pixel_reliable(i))
            .map(|i| f64::from(bundle.depth[i]))
            .collect(),
    )
    .ok_or(PartitionError::NoReliableTarget)?;

    // bounding box of the target region in patch units, expanded per side
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for &t in &target {
        let (r, c) = (patch(t) / grid.cols, patch(t) % grid.cols);
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    let er = expansion * (r1 - r0 + 1) as f64;
    let ec = expansion * (c1 - c0 + 1) as f64;
    let in_box = |p: usize| {
        let (r, c) = ((p / grid.cols) as f64 + 0.5, (p % grid.cols) as f64 + 0.5);
        r >= r0 as f64 - er && r <= (r1 + 1) as f64 + er && c >= c0 as f64 - ec && c <= (c1 + 1) as f64 + ec
    };
    let candidates: Vec<usize> = (0..n)
        .filter(|&t| reliable[t] && in_box(patch(t)) && target.binary_search(&t).is_err())
        .collect();
    let shallower = bundle.task == TaskId::T2;
    let select = |margin: f64| -> Vec<usize> {
        candidates
            .iter()
            .copied()
            .filter(|&t| {
                let d = depths[t].expect("reliable tokens have reliable pixels");
                if shallower {
                    d < target_depth - margin
                } else {
                    d > target_depth + margin
                }
            })
            .collect()
    };
    let mut margin = bundle.delta;
    let mut adaptive = false;
    let mut depth_correct = select(margin);
    if depth_correct.is_empty() {
        let (lo, hi) = (0..n)
            .filter(|&t| reliable[t] && in_box(patch(t)))
            .flat_map(|t| grid.pixels(patch(t)))
            .filter(|&i| bundle.pixel_reliable(i))
            .map(|i| f64::from(bundle.depth[i]))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        margin = 0.1 * (hi - lo);
        adaptive = true;
        depth_correct = select(margin);
    }
    if depth_correct.is_empty() {
        return Ok(PartitionOutcome::Excluded(ExclusionReason::EmptyDepthRegion));
    }
    let irrelevant = (0..n)
        .filter(|&t| {
            reliable[t] && target.binary_search(&t).is_err() && depth_correct.binary_search(&t).is_err()
        })
        .collect();
    Ok(PartitionOutcome::Partition(RegionPartition {
        target,
        depth_correct,
        irrelevant,
        target_depth,
        margin,
        adaptive,
    }))
}

/// Attention fractions of one (layer, head) cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub tf: f64,
    pub dgar: f64,
    pub irr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgarScores {
    pub layers: Vec<u32>,
    pub n_heads: usize,
    /// Row-major `layer × head`; `None` where visual attention is zero.
    pub cells: Vec<Option<Cell>>,
    pub chance: f64,
}

impl DgarScores {
    pub fn cell(&self, layer: usize, head: usize) -> Option<Cell> {
        self.cells[layer * self.n_heads + head]
    }

    fn mean_of(cells: impl Iterator<Item = Cell>) -> Option<Cell> {
        let (mut sum, mut n) = (Cell { tf: 0.0, dgar: 0.0, irr: 0.0 }, 0usize);
        for c in cells {
            sum.tf += c.tf;
            sum.dgar += c.dgar;
            sum.irr += c.irr;
            n += 1;
        }
        (n > 0).then(|| {
            let k = n as f64;
            Cell {
                tf: sum.tf / k,
                dgar: sum.dgar / k,
                irr: sum.irr / k,
            }
        })
    }

    /// Mean over all defined cells.
    pub fn means(&self) -> Option<Cell> {
        Self::mean_of(self.cells.iter().flatten().copied())
    }

    /// Mean over the defined heads of each layer.
    pub fn layer_means(&self) -> Vec<Option<Cell>> {
        self.cells
            .chunks(self.n_heads.max(1))
            .map(|row| Self::mean_of(row.iter().flatten().copied()))
            .collect()
    }
}

/// Region attention fractions per (layer, head).
///
/// Region sums accumulate f32 weights in f64, which is exact for any
/// realistic token count, so uniform attention reproduces the count-based
/// chance level bit for bit.
pub fn dgar(bundle: &ActivationBundle, partition: &RegionPartition) -> DgarScores {
    let mut region = alloc::vec![0u8; bundle.n_tokens()];
    for (tag, set) in [
        (1u8, &partition.target),
        (2, &partition.depth_correct),
        (3, &partition.irrelevant),
    ] {
        for &t in set {
            region[t] = tag;
        }
    }
    let mut cells = Vec::with_capacity(bundle.n_layers() * bundle.n_heads);
    for layer in 0..bundle.n_layers() {
        for head in 0..bundle.n_heads {
            let mut mass = [0.0f64; 4];
            for (t, &a) in bundle.attention_row(layer, head).iter().enumerate() {
                mass[region[t] as usize] += f64::from(a);
            }
            let total = mass[1] + mass[2] + mass[3];
            cells.push((total > 0.0).then(|| Cell {
                tf: mass[1] / total,
                dgar: mass[2] / total,
                irr: mass[3] / total,
            }));
        }
    }
    DgarScores {
        layers: bundle.layers.clone(),
        n_heads: bundle.n_heads,
        cells,
        chance: partition.chance(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureMode {
    TargetFixation,
    DepthAwareButWrong,
    AttentionDispersed,
}

impl FailureMode {
    pub const ALL: [FailureMode; 3] = [
        FailureMode::TargetFixation,
        FailureMode::DepthAwareButWrong,
        FailureMode::AttentionDispersed,
    ];
}

/// Winner-take-all over per-example means; ties go to TF, then DGAR.
pub fn classify_failure(means: Cell) -> FailureMode {
    if means.tf >= means.dgar && means.tf >= means.irr {
        FailureMode::TargetFixation
    } else if means.dgar >= means.irr {
        FailureMode::DepthAwareButWrong
    } else {
        FailureMode::AttentionDispersed
    }
}

/// Full per-example DGAR analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExampleDgar {
    Scored {
        example_id: String,
        task: TaskId,
        partition: RegionPartition,
        scores: DgarScores,
        means: Cell,
        mode: FailureMode,
    },
    Excluded {
        example_id: String,
        task: TaskId,
        reason: ExclusionReason,
    },
}

impl ExampleDgar {
    pub fn analyze(bundle: &ActivationBundle, expansion: Option<f64>) -> Result<Self, PartitionError> {
        let expansion = expansion
            .or_else(|| expansion_fraction(bundle.task))
            .ok_or(BundleError::Task(bundle.task))?;
        let (example_id, task) = (bundle.example_id.clone(), bundle.task);
        let partition = match partition_regions(bundle, expansion)? {
            PartitionOutcome::Partition(p) => p,
            PartitionOutcome::Excluded(reason) => {
                return Ok(ExampleDgar::Excluded {
                    example_id,
                    task,
                    reason,
                })
            }
        };
        let scores = dgar(bundle, &partition);
        Ok(match scores.means() {
            Some(means) => ExampleDgar::Scored {
                example_id,
                task,
                partition,
                mode: classify_failure(means),
                scores,
                means,
            },
            None => ExampleDgar::Excluded {
                example_id,
                task,
                reason: ExclusionReason::NoVisualAttention,
            },
        })
    }

    pub fn task(&self) -> TaskId {
        match self {
            ExampleDgar::Scored { task, .. } | ExampleDgar::Excluded { task, .. } => *task,
        }
    }
}

/// Per-task aggregate over analyzed examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgarSummary {
    pub task: TaskId,
    pub scored: usize,
    pub excluded: usize,
    /// Mean of per-example means.
    pub mean: Option<Cell>,
    pub mean_chance: Option<f64>,
    /// Counts in [`FailureMode::ALL`] order.
    pub modes: [usize; 3],
    /// Mean DGAR per decoder layer label.
    pub layer_dgar: BTreeMap<u32, f64>,
    /// Mean DGAR per (layer label, head).
    pub layer_head_dgar: BTreeMap<u32, Vec<Option<f64>>>,
}

fn fold_mean(acc: &mut (f64, usize), v: f64) {
    acc.0 += v;
    acc.1 += 1;
}

pub fn summarize(examples: &[ExampleDgar]) -> Vec<DgarSummary> {
    let mut tasks: Vec<TaskId> = examples.iter().map(ExampleDgar::task).collect();
    tasks.sort();
    tasks.dedup();
    tasks
        .into_iter()
        .map(|task| {
            let mut s = DgarSummary {
                task,
                scored: 0,
                excluded: 0,
                mean: None,
                mean_chance: None,
                modes: [0; 3],
                layer_dgar: BTreeMap::new(),
                layer_head_dgar: BTreeMap::new(),
            };
            let (mut tf, mut dg, mut ir, mut ch) = ((0.0, 0), (0.0, 0), (0.0, 0), (0.0, 0));
            let mut layers: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
            let mut heads: BTreeMap<u32, Vec<(f64, usize)>> = BTreeMap::new();
            for e in examples.iter().filter(|e| e.task() == task) {
                match e {
                    ExampleDgar::Excluded { .. } => s.excluded += 1,
                    ExampleDgar::Scored {
                        scores, means, mode, ..
                    } => {
                        s.scored += 1;
                        s.modes[*mode as usize] += 1;
                        fold_mean(&mut tf, means.tf);
                        fold_mean(&mut dg, means.dgar);
                        fold_mean(&mut ir, means.irr);
                        fold_mean(&mut ch, scores.chance);
                        let layer_means = scores.layer_means();
                        for (l, label) in scores.layers.iter().enumerate() {
                            if let Some(m) = layer_means[l] {
                                fold_mean(layers.entry(*label).or_insert((0.0, 0)), m.dgar);
                            }
                            let row = heads
                                .entry(*label)
                                .or_insert_with(|| alloc::vec![(0.0, 0); scores.n_heads]);
                            if row.len() < scores.n_heads {
                                row.resize(scores.n_heads, (0.0, 0));
                            }
                            for h in 0..scores.n_heads {
                                if let Some(c) = scores.cell(l, h) {
                                    fold_mean(&mut row[h], c.dgar);
                                }
                            }
                        }
                    }
                }
            }
            if s.scored > 0 {
                let k = s.scored as f64;
                s.mean = Some(Cell {
                    tf: tf.0 / k,
                    dgar: dg.0 / k,
                    irr: ir.0 / k,
                });
                s.mean_chance = Some(ch.0 / k);
            }
            s.layer_dgar = layers.into_iter().map(|(l, (sum, n))| (l, sum / n as f64)).collect();
            s.layer_head_dgar = heads
                .into_iter()
                .map(|(l, row)| {
                    (
                        l,
                        row.into_iter()
                            .map(|(sum, n)| (n > 0).then(|| sum / n as f64))
                            .collect(),
                    )
                })
                .collect();
            s
        })
        .collect()
}
