// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatialcf::config::RunConfig;
use spatialcf::dataset::{self, Dataset};
use spatialcf_core::gen::NounPool;
use spatialcf_core::mech::{
    partition_regions, ActivationBundle, Corruption, CorruptionTrace, PartitionOutcome,
    PatchGrid, Site, Stage, TraceRecord, DEFAULT_DELTA,
};
use spatialcf_core::scene::{IMAGE_HEIGHT, IMAGE_WIDTH};
use spatialcf_core::TaskId;

pub const SEED: u64 = 0x5eed_2024;

/// Run config generating `n` instances of every task.
pub fn small_config(n: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.generate.seed = seed;
    cfg.generate.counts = TaskId::ALL.iter().map(|&t| (t, n)).collect::<BTreeMap<_, _>>();
    cfg
}

pub fn small_dataset(n: usize, seed: u64) -> Dataset {
    dataset::generate(&small_config(n, seed), &NounPool::bundled()).expect("generation succeeds")
}

pub fn task_dataset(task: TaskId, n: usize, seed: u64) -> Dataset {
    let mut cfg = RunConfig::default();
    cfg.generate.seed = seed;
    cfg.generate.tasks = vec![task];
    cfg.generate.counts = [(task, n)].into();
    dataset::generate(&cfg, &NounPool::bundled()).expect("generation succeeds")
}

pub const ROWS: usize = 12;
pub const COLS: usize = 18;

pub fn grid() -> PatchGrid {
    PatchGrid {
        image_height: IMAGE_HEIGHT,
        image_width: IMAGE_WIDTH,
        rows: ROWS,
        cols: COLS,
    }
}

/// Per-patch depth and confidence plus target patches, expanded to pixels.
pub fn bundle(
    id: &str,
    task: TaskId,
    depth: &[f32],
    confidence: &[f32],
    target: &[usize],
    layers: usize,
    heads: usize,
    attention: Vec<f32>,
) -> ActivationBundle {
    let g = grid();
    let px = IMAGE_HEIGHT * IMAGE_WIDTH;
    let mut b = ActivationBundle {
        example_id: id.into(),
        task,
        grid: g,
        layers: (0..layers as u32).map(|l| l * 4).collect(),
        n_heads: heads,
        token_patch: (0..g.len() as u32).collect(),
        attention,
        depth: vec![0.0; px],
        confidence: vec![0.0; px],
        target_mask: vec![0.0; px],
        delta: DEFAULT_DELTA,
    };
    for p in 0..g.len() {
        for i in g.pixels(p).collect::<Vec<_>>() {
            b.depth[i] = depth[p];
            b.confidence[i] = confidence[p];
        }
    }
    for &p in target {
        for i in g.pixels(p).collect::<Vec<_>>() {
            b.target_mask[i] = 1.0;
        }
    }
    b
}

/// Target 2x2 patches at 2 m inside a 3 m ring, 8 m background.
pub fn scene_layout() -> (Vec<f32>, Vec<f32>, Vec<usize>) {
    let mut depth = vec![8.0f32; ROWS * COLS];
    let target = vec![5 * COLS + 8, 5 * COLS + 9, 6 * COLS + 8, 6 * COLS + 9];
    for r in 4..=7 {
        for c in 7..=10 {
            depth[r * COLS + c] = 3.0;
        }
    }
    for &p in &target {
        depth[p] = 2.0;
    }
    (depth, vec![1.0; ROWS * COLS], target)
}

/// `n` bundles whose visual attention splits about 17 / 3 / 80 percent over
/// target, depth-correct and irrelevant tokens.
pub fn dispersed_bundles(n: usize, seed: u64) -> Vec<ActivationBundle> {
    let (depth, conf, target) = scene_layout();
    let probe = bundle("probe", TaskId::T1, &depth, &conf, &target, 1, 1, vec![0.0; ROWS * COLS]);
    let Ok(PartitionOutcome::Partition(p)) = partition_regions(&probe, 0.375) else {
        panic!("fixture must partition");
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (layers, heads) = (7, 4);
    (0..n)
        .map(|k| {
            let mut attention = Vec::new();
            for _ in 0..layers * heads {
                let t = 0.17 + rng.gen_range(-0.03..0.03);
                let d = 0.03 + rng.gen_range(-0.015..0.015);
                let mut row = vec![0.0f32; ROWS * COLS];
                for (set, share) in [&p.target, &p.depth_correct, &p.irrelevant].iter().zip([t, d, 1.0 - t - d]) {
                    let weights: Vec<f64> = set.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
                    let total: f64 = weights.iter().sum();
                    for (&tok, w) in set.iter().zip(&weights) {
                        row[tok] = (0.6 * share * w / total) as f32;
                    }
                }
                attention.extend(row);
            }
            bundle(&format!("ex{k:03}"), TaskId::T1, &depth, &conf, &target, layers, heads, attention)
        })
        .collect()
}

pub fn trace(id: &str, p_clean: f64, p_corr: f64, flipped: bool, p_rest: impl Fn(Site) -> f64) -> TraceRecord {
    TraceRecord {
        example_id: id.into(),
        task: Some(TaskId::T1),
        top1_token: 42,
        p_clean,
        corruptions: [(
            Corruption::A,
            CorruptionTrace {
                p_corr,
                argmax_flipped: flipped,
                p_rest: Site::ALL.into_iter().map(|s| (s, p_rest(s))).collect(),
            },
        )]
        .into(),
    }
}

pub fn v_shape(site: Site) -> f64 {
    match site.stage() {
        Stage::Vit | Stage::Lm => 1.0,
        Stage::Merger => 0.2,
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let (u, v): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// V-shaped recovery traces plus the per-site oracle means of the injected
/// scores. One ungrounded record is appended.
pub fn v_shape_traces(n: usize, seed: u64) -> (Vec<TraceRecord>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p_clean, p_corr) = (0.8, 0.1);
    let mut sums = vec![0.0; Site::ALL.len()];
    let mut records = Vec::new();
    for k in 0..n {
        let s: Vec<f64> = Site::ALL.iter().map(|&site| v_shape(site) + 0.05 * gaussian(&mut rng)).collect();
        for (acc, v) in sums.iter_mut().zip(&s) {
            *acc += v;
        }
        let at = |site: Site| s[Site::ALL.iter().position(|x| *x == site).expect("known site")];
        records.push(trace(&format!("ex{k:03}"), p_clean, p_corr, false, |site| {
            p_corr + at(site) * (p_clean - p_corr)
        }));
    }
    records.push(trace("ungrounded", 0.5, 0.499, false, |_| 0.0));
    (records, sums.into_iter().map(|s| s / n as f64).collect())
}
