// SPDX-License-Identifier: MIT OR Apache-2.0

//! Joins responses to instances and grades them; runs the mechanistic
//! analyses over bundles and traces.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spatialcf_core::mech::{
    groundedness_table, recovery_curves, summarize, Corruption, CurvePoint, DgarSummary,
    ExampleDgar, GroundednessRow, TraceRecord, BOOTSTRAP_RESAMPLES,
};
use spatialcf_core::parse::parse_response;
use spatialcf_core::score::{aggregate, grade, AggregateRow, Grade, GradeDetail, GradeRecord, ScoringConfig};
use spatialcf_core::TaskId;

use crate::bundle_io;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::query::{ResponseRecord, Status};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub grades: Vec<GradeRecord>,
    pub rows: Vec<AggregateRow>,
    /// Responses naming an instance the dataset does not contain.
    pub orphans: Vec<String>,
    /// Later responses for an (instance, model) already seen; ignored.
    pub duplicates: Vec<String>,
    /// Per model: instances with no response.
    pub missing: BTreeMap<String, usize>,
    pub unanswered: BTreeMap<String, usize>,
}

/// Grades every response against `ds`. Unanswered responses grade as
/// Incorrect. With `strict`, orphans and duplicates are errors.
pub fn score(ds: &Dataset, responses: &[ResponseRecord], cfg: &ScoringConfig, strict: bool) -> Result<ScoreOutcome> {
    let index: HashMap<&str, usize> = ds
        .instances
        .iter()
        .enumerate()
        .map(|(k, i)| (i.id.as_str(), k))
        .collect();
    let mut out = ScoreOutcome::default();
    let mut seen: BTreeMap<&str, Vec<bool>> = BTreeMap::new();
    let mut jobs = Vec::new();
    for r in responses {
        let Some(&k) = index.get(r.instance_id.as_str()) else {
            out.orphans.push(format!("{} ({})", r.instance_id, r.model));
            continue;
        };
        let marks = seen
            .entry(r.model.as_str())
            .or_insert_with(|| vec![false; ds.instances.len()]);
        if std::mem::replace(&mut marks[k], true) {
            out.duplicates.push(format!("{} ({})", r.instance_id, r.model));
            continue;
        }
        jobs.push((k, r));
    }
    if strict && !(out.orphans.is_empty() && out.duplicates.is_empty()) {
        return Err(Error::Strict(format!(
            "{} orphan and {} duplicate responses: {}",
            out.orphans.len(),
            out.duplicates.len(),
            out.orphans.iter().chain(&out.duplicates).take(10).cloned().collect::<Vec<_>>().join(", ")
        )));
    }
    for o in &out.orphans {
        log::warn!("orphan response {o}");
    }
    for d in &out.duplicates {
        log::warn!("duplicate response {d} ignored");
    }
    for (model, marks) in &seen {
        out.missing
            .insert(model.to_string(), marks.iter().filter(|m| !**m).count());
    }
    out.grades = jobs
        .par_iter()
        .map(|&(k, r)| {
            let inst = &ds.instances[k];
            let detail = match r.status {
                Status::Answered => grade(inst, Some(&ds.scenes[k]), &parse_response(&r.raw, inst.task), cfg),
                Status::Unanswered => GradeDetail {
                    grade: Grade::Incorrect,
                    volumetric_violation: None,
                },
            };
            GradeRecord {
                instance_id: inst.id.clone(),
                model: r.model.clone(),
                task: inst.task,
                detail,
            }
        })
        .collect();
    for r in responses.iter().filter(|r| r.status == Status::Unanswered) {
        *out.unanswered.entry(r.model.clone()).or_default() += 1;
    }
    out.rows = aggregate(&out.grades);
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MechOutcome {
    pub examples: Vec<ExampleDgar>,
    pub summaries: Vec<DgarSummary>,
    pub groundedness: Vec<GroundednessRow>,
    pub curves: BTreeMap<Corruption, Vec<CurvePoint>>,
    /// Inputs that failed to read or validate.
    pub skipped: Vec<String>,
}

/// DGAR over every bundle in `dir`. Malformed bundles are skipped and
/// listed, or fail the run under `strict`.
pub fn analyze_bundles(dir: &Path, strict: bool) -> Result<(Vec<ExampleDgar>, Vec<String>)> {
    let paths = bundle_io::list_bundles(dir)?;
    let results: Vec<Result<ExampleDgar>> = paths
        .par_iter()
        .map(|p| {
            let b = bundle_io::read_bundle(p)?;
            ExampleDgar::analyze(&b, None).map_err(|e| Error::Data(format!("{}: {e}", p.display())))
        })
        .collect();
    let (mut examples, mut skipped) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(e) => examples.push(e),
            Err(e) if strict => return Err(Error::Strict(e.to_string())),
            Err(e) => {
                log::warn!("skipping bundle: {e}");
                skipped.push(e.to_string());
            }
        }
    }
    Ok((examples, skipped))
}

/// Groundedness counts and recovery curves for each corruption present.
pub fn analyze_traces(records: &[TraceRecord], seed: u64) -> (Vec<GroundednessRow>, BTreeMap<Corruption, Vec<CurvePoint>>) {
    let curves = Corruption::ALL
        .par_iter()
        .filter(|c| records.iter().any(|r| r.corruptions.contains_key(c)))
        .map(|&c| (c, recovery_curves(records, c, BOOTSTRAP_RESAMPLES, seed)))
        .collect();
    (groundedness_table(records), curves)
}

/// Full mechanistic run. Either input may be absent.
pub fn mech(bundles: Option<&Path>, traces: Option<&Path>, seed: u64, strict: bool) -> Result<MechOutcome> {
    let mut out = MechOutcome::default();
    if let Some(dir) = bundles {
        let (examples, skipped) = analyze_bundles(dir, strict)?;
        out.summaries = summarize(&examples);
        out.examples = examples;
        out.skipped.extend(skipped);
    }
    if let Some(path) = traces {
        let records = if strict {
            bundle_io::read_traces(path).map_err(|e| Error::Strict(e.to_string()))?
        } else {
            let (ok, skipped) = bundle_io::read_traces_lenient(path)?;
            for s in &skipped {
                log::warn!("skipping trace {s}");
            }
            out.skipped.extend(skipped);
            ok
        };
        (out.groundedness, out.curves) = analyze_traces(&records, seed);
    }
    Ok(out)
}

/// Tasks present in `rows`, in task order.
pub fn tasks_in(rows: &[AggregateRow]) -> Vec<TaskId> {
    let mut t: Vec<TaskId> = rows.iter().map(|r| r.task).collect();
    t.sort();
    t.dedup();
    t
}
