// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dataset generation and the on-disk layout:
//!
//! ```text
//! <dir>/manifest.json         tool version, seed, config hash, yield and rejection counts
//! <dir>/instances.jsonl       one TaskInstance per line, tasks in order T1..T6
//! <dir>/scenes/<scene>.json   one Scene per instance
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spatialcf_core::bench::{build_instance, derive_ground_truth, TaskInstance};
use spatialcf_core::gen::NounPool;
use spatialcf_core::{RejectionReason, Scene, TaskId};

use crate::config::{GenerateConfig, RunConfig};
use crate::error::{Error, Result};
use crate::fsio;

pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCENES_DIR: &str = "scenes";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskStats {
    pub requested: usize,
    pub emitted: usize,
    pub drafts: usize,
    /// Instances whose draft budget ran out.
    pub exhausted: usize,
    pub rejections: BTreeMap<RejectionReason, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: GenerateConfig,
    pub tasks: BTreeMap<TaskId, TaskStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub instances: Vec<TaskInstance>,
    /// Same order as `instances`.
    pub scenes: Vec<Scene>,
}

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Generates every requested instance. Work is spread over the current
/// rayon pool; output order and content do not depend on it.
pub fn generate(run: &RunConfig, pool: &NounPool) -> Result<Dataset> {
    run.validate()?;
    let cfg = &run.generate;
    let jobs: Vec<(TaskId, usize)> = cfg
        .tasks
        .iter()
        .flat_map(|&t| (0..cfg.count(t)).map(move |i| (t, i)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(task, i)| build_instance(task, i, cfg.seed, pool, &cfg.gen).map(|o| (task, o)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Config(e.to_string()))?;

    let mut tasks: BTreeMap<TaskId, TaskStats> = cfg
        .tasks
        .iter()
        .map(|&t| {
            let stats = TaskStats {
                requested: cfg.count(t),
                ..TaskStats::default()
            };
            (t, stats)
        })
        .collect();
    let (mut instances, mut scenes) = (Vec::new(), Vec::new());
    for (task, outcome) in outcomes {
        let stats = tasks.get_mut(&task).expect("task registered above");
        stats.drafts += outcome.drafts();
        for r in &outcome.rejections {
            *stats.rejections.entry(*r).or_default() += 1;
        }
        match outcome.emitted {
            Some(e) => {
                stats.emitted += 1;
                instances.push(e.instance);
                scenes.push(e.scene);
            }
            None => stats.exhausted += 1,
        }
    }
    for (task, stats) in &tasks {
        if stats.requested > 0 && stats.emitted == 0 {
            return Err(Error::Data(format!("{task}: zero yield after the draft budget")));
        }
        if stats.exhausted > 0 {
            log::warn!("{task}: {} instances exhausted their draft budget", stats.exhausted);
        }
    }
    Ok(Dataset {
        manifest: Manifest {
            tool: "spatialcf".into(),
            version: tool_version(),
            seed: cfg.seed,
            config_hash: run.generation_hash(),
            config: cfg.clone(),
            tasks,
        },
        instances,
        scenes,
    })
}

pub fn scene_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(SCENES_DIR).join(format!("{scene_id}.json"))
}

pub fn write(dir: &Path, ds: &Dataset) -> Result<()> {
    for (inst, scene) in ds.instances.iter().zip(&ds.scenes) {
        fsio::write_json(&scene_path(dir, &inst.scene_id), scene)?;
    }
    fsio::write_jsonl(&dir.join(INSTANCES_FILE), &ds.instances)?;
    fsio::write_json(&dir.join(MANIFEST_FILE), &ds.manifest)
}

pub fn read_instances(dir: &Path) -> Result<Vec<TaskInstance>> {
    fsio::read_jsonl(&dir.join(INSTANCES_FILE))
}

pub fn read_scene(dir: &Path, scene_id: &str) -> Result<Scene> {
    let scene: Scene = fsio::read_json(&scene_path(dir, scene_id))?;
    scene
        .validate()
        .map_err(|e| Error::Data(format!("{scene_id}: {e}")))?;
    Ok(scene)
}

pub fn read(dir: &Path) -> Result<Dataset> {
    let manifest: Manifest = fsio::read_json(&dir.join(MANIFEST_FILE))?;
    let instances = read_instances(dir)?;
    let scenes = instances
        .par_iter()
        .map(|i| read_scene(dir, &i.scene_id))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        manifest,
        instances,
        scenes,
    })
}

/// An instance whose stored ground truth differs from re-derivation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub instance_id: String,
    pub reason: String,
}

/// Re-derives every ground truth from its scene and target.
pub fn rederive(ds: &Dataset) -> Vec<Mismatch> {
    let gen = &ds.manifest.config.gen;
    ds.instances
        .par_iter()
        .zip(&ds.scenes)
        .filter_map(|(inst, scene)| {
            let reason = match derive_ground_truth(inst.task, scene, &inst.target, gen) {
                Ok(gt) if gt == inst.ground_truth => return None,
                Ok(gt) => format!("stored {:?}, derived {:?}", inst.ground_truth, gt),
                Err(e) => e.to_string(),
            };
            Some(Mismatch {
                instance_id: inst.id.clone(),
                reason,
            })
        })
        .collect()
}
