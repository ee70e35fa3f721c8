// SPDX-License-Identifier: MIT OR Apache-2.0

//! Attention-region analytics and causal-tracing recovery over recorded
//! activation bundles and trace records.
//!
//! Nothing here runs a model. Bundles carry last-position attention over
//! visual tokens already normalized by the producer, plus the depth map,
//! confidence map and target mask of the example.

mod bundle;
mod dgar;
mod trace;

pub use bundle::{ActivationBundle, BundleError, PatchGrid};
pub use dgar::{
    classify_failure, dgar, expansion_fraction, partition_regions, summarize, Cell,
    DgarScores, DgarSummary, ExampleDgar, ExclusionReason, FailureMode, PartitionError,
    PartitionOutcome,
    RegionPartition, DEFAULT_DELTA,
};
pub use trace::{
    groundedness, groundedness_table, recovery, recovery_curves, Corruption, CorruptionTrace,
    CurvePoint, Groundedness, GroundednessRow, Site, Stage, TraceError, TraceRecord,
    BOOTSTRAP_RESAMPLES,
};
