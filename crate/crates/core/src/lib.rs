// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic synthetic-scene engine and evaluation core for
//! spatial-counterfactual benchmarks.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. File formats,
//! HTTP querying and the command-line front end live in the `spatialcf`
//! companion crate.
//!
//! ## Layout
//!
//! - [`scene`]: box scenes, pinhole projection, mask rasterization, depth
//!   rendering and the z-buffer oracle.
//! - [`gen`]: seeded scene generation for occlusion, reflection and
//!   planning scenes.
//! - [`occlusion`]: the directed occlusion graph, visibility predicates and
//!   validation gates.
//! - [`truth`]: ground truths for the occlusion and reflection tasks.
//! - [`swap`]: collision-aware single-swap and multi-swap planning.
//! - [`bench`]: task instances, draft construction and rejection accounting.
//! - [`prompt`] and [`parse`]: prompt rendering and response parsing.
//! - [`score`]: three-way grading and aggregation.
//! - [`mech`]: attention-region analytics and causal-tracing recovery.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bench;
pub mod gen;
pub mod mech;
pub mod occlusion;
pub mod parse;
pub mod prompt;
pub mod scene;
pub mod score;
pub mod swap;
pub mod task;
pub mod truth;

pub use bench::{DraftOutcome, RejectionReason, TaskInstance};
pub use occlusion::{GateConfig, OcclusionGraph};
pub use scene::{Camera, DepthMap, Mask, ReflectiveSurface, Scene, SceneObject};
pub use task::TaskId;

/// Splitmix64 finalizer. Used to derive independent sub-seeds from a
/// master seed and a counter.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
