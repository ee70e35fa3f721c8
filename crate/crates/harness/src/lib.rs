// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dataset files, scene rendering, model querying, grading and report
//! emission around `spatialcf-core`, plus the `spatialcf` command line.

pub mod bundle_io;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod fsio;
pub mod query;
pub mod render;
pub mod report;

pub use error::{Error, Result};
