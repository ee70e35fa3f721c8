// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use spatialcf_core::bench::{build_instance, Emitted};
use spatialcf_core::gen::{GenConfig, NounPool};
use spatialcf_core::TaskId;

pub const MASTER_SEED: u64 = 0x5eed_2024;

/// First `n` emitted instances of `task` under the default config.
pub fn emitted(task: TaskId, n: usize, seed: u64) -> Vec<Emitted> {
    let pool = NounPool::bundled();
    let cfg = GenConfig::default();
    (0..n)
        .map(|i| {
            build_instance(task, i, seed, &pool, &cfg)
                .expect("default config is valid")
                .emitted
                .unwrap_or_else(|| panic!("{task} #{i}: draft budget exhausted"))
        })
        .collect()
}
