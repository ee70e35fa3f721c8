// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV, JSON and Markdown report emission.
//!
//! Score reports: `scores.csv`, `scores.json`, `grades.jsonl`, `report.md`.
//! Mechanistic reports: `dgar_examples.csv`, `dgar_modes.csv`,
//! `dgar_layers.csv`, `dgar_layer_head.csv`, `groundedness.csv`,
//! `recovery.csv`, `mech.json`, `mech.md`. Every report directory also gets
//! `manifest.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spatialcf_core::mech::{ExampleDgar, FailureMode};
use spatialcf_core::score::AggregateRow;
use spatialcf_core::TaskId;

use crate::error::{Error, Result};
use crate::evaluate::{tasks_in, MechOutcome, ScoreOutcome};
use crate::fsio;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    /// Input path to SHA-256 of its contents; directories are omitted.
    pub inputs: BTreeMap<String, String>,
}

impl ReportManifest {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        ReportManifest {
            tool: "spatialcf".into(),
            version: crate::dataset::tool_version(),
            command: command.into(),
            seed,
            config_hash,
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        if path.is_file() {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            self.inputs
                .insert(path.display().to_string(), fsio::sha256_hex(&bytes));
        }
        Ok(self)
    }
}

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).expect("in-memory write");
    }
    for r in rows {
        w.serialize(r).expect("flat rows serialize");
    }
    w.into_inner().expect("in-memory flush")
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    fsio::write_atomic(path, &csv_bytes(rows, header))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

#[derive(Serialize)]
struct ScoreCsvRow<'a> {
    model: &'a str,
    task: TaskId,
    n: usize,
    correct: usize,
    hallucinated: usize,
    volumetric_errors: usize,
    accuracy_pct: String,
    ci_half_width_pct: String,
    hallucination_rate_pct: String,
    volumetric_rate_pct: String,
}

const SCORE_HEADER: [&str; 10] = [
    "model",
    "task",
    "n",
    "correct",
    "hallucinated",
    "volumetric_errors",
    "accuracy_pct",
    "ci_half_width_pct",
    "hallucination_rate_pct",
    "volumetric_rate_pct",
];

pub fn scores_csv(rows: &[AggregateRow]) -> Vec<u8> {
    let flat: Vec<ScoreCsvRow> = rows
        .iter()
        .map(|r| ScoreCsvRow {
            model: &r.model,
            task: r.task,
            n: r.n,
            correct: r.correct,
            hallucinated: r.hallucinated,
            volumetric_errors: r.volumetric_errors,
            accuracy_pct: format!("{:.2}", r.accuracy_pct),
            ci_half_width_pct: format!("{:.2}", r.ci_half_width_pct),
            hallucination_rate_pct: format!("{:.2}", r.hallucination_rate_pct),
            volumetric_rate_pct: r.volumetric_rate_pct.map(|v| format!("{v:.2}")).unwrap_or_default(),
        })
        .collect();
    csv_bytes(&flat, &SCORE_HEADER)
}

fn pivot<F>(rows: &[AggregateRow], tasks: &[TaskId], cell: F) -> String
where
    F: Fn(&AggregateRow) -> Option<String>,
{
    let mut by_model: BTreeMap<&str, BTreeMap<TaskId, &AggregateRow>> = BTreeMap::new();
    for r in rows {
        by_model.entry(&r.model).or_default().insert(r.task, r);
    }
    let mut md = String::from("| Model |");
    for t in tasks {
        let _ = write!(md, " {t} |");
    }
    md.push_str("\n|---|");
    md.push_str(&"---:|".repeat(tasks.len()));
    md.push('\n');
    for (model, cells) in by_model {
        let _ = write!(md, "| {model} |");
        for t in tasks {
            let text = cells.get(t).and_then(|r| cell(r)).unwrap_or_else(|| "-".into());
            let _ = write!(md, " {text} |");
        }
        md.push('\n');
    }
    md
}

/// Accuracy with its interval half-width, one row per model and one column
/// per task.
pub fn accuracy_table(rows: &[AggregateRow]) -> String {
    pivot(rows, &tasks_in(rows), |r| {
        Some(format!("{:.2} ± {:.2}", r.accuracy_pct, r.ci_half_width_pct))
    })
}

/// Volumetric-feasibility error rates on the planning tasks.
pub fn volumetric_table(rows: &[AggregateRow]) -> String {
    let tasks: Vec<TaskId> = tasks_in(rows).into_iter().filter(|t| t.is_planning()).collect();
    pivot(rows, &tasks, |r| r.volumetric_rate_pct.map(|v| format!("{v:.2}")))
}

pub fn hallucination_table(rows: &[AggregateRow]) -> String {
    pivot(rows, &tasks_in(rows), |r| Some(format!("{:.2}", r.hallucination_rate_pct)))
}

pub fn score_markdown(out: &ScoreOutcome) -> String {
    let mut md = String::from("# Scores\n\n## Accuracy (%)\n\n");
    md.push_str(&accuracy_table(&out.rows));
    md.push_str("\n## Volumetric-feasibility errors (%)\n\n");
    md.push_str(&volumetric_table(&out.rows));
    md.push_str("\n## Hallucination (%)\n\n");
    md.push_str(&hallucination_table(&out.rows));
    let _ = write!(
        md,
        "\n## Ingestion\n\n- orphan responses: {}\n- duplicate responses: {}\n",
        out.orphans.len(),
        out.duplicates.len()
    );
    for (model, n) in &out.missing {
        let _ = writeln!(md, "- {model}: {n} instances without a response, {} unanswered", out.unanswered.get(model).copied().unwrap_or(0));
    }
    md
}

pub fn write_score_report(dir: &Path, out: &ScoreOutcome, manifest: &ReportManifest) -> Result<()> {
    fsio::write_atomic(&dir.join("scores.csv"), &scores_csv(&out.rows))?;
    fsio::write_json(&dir.join("scores.json"), out)?;
    fsio::write_jsonl(&dir.join("grades.jsonl"), &out.grades)?;
    fsio::write_atomic(&dir.join("report.md"), score_markdown(out).as_bytes())?;
    fsio::write_json(&dir.join("manifest.json"), manifest)
}

pub fn mode_name(m: FailureMode) -> &'static str {
    match m {
        FailureMode::TargetFixation => "target_fixation",
        FailureMode::DepthAwareButWrong => "depth_aware_but_wrong",
        FailureMode::AttentionDispersed => "attention_dispersed",
    }
}

#[derive(Serialize)]
struct ExampleRow {
    example_id: String,
    task: TaskId,
    status: &'static str,
    reason: String,
    tf: String,
    dgar: String,
    irr: String,
    chance: String,
    mode: &'static str,
    n_target: String,
    n_depth_correct: String,
    n_irrelevant: String,
    target_depth: String,
    margin: String,
    adaptive: String,
}

fn example_row(e: &ExampleDgar) -> ExampleRow {
    match e {
        ExampleDgar::Scored {
            example_id,
            task,
            partition,
            scores,
            means,
            mode,
        } => {
            let [a, b, c] = partition.counts();
            ExampleRow {
                example_id: example_id.clone(),
                task: *task,
                status: "scored",
                reason: String::new(),
                tf: opt(Some(means.tf)),
                dgar: opt(Some(means.dgar)),
                irr: opt(Some(means.irr)),
                chance: opt(Some(scores.chance)),
                mode: mode_name(*mode),
                n_target: a.to_string(),
                n_depth_correct: b.to_string(),
                n_irrelevant: c.to_string(),
                target_depth: opt(Some(partition.target_depth)),
                margin: opt(Some(partition.margin)),
                adaptive: partition.adaptive.to_string(),
            }
        }
        ExampleDgar::Excluded {
            example_id,
            task,
            reason,
        } => ExampleRow {
            example_id: example_id.clone(),
            task: *task,
            status: "excluded",
            reason: serde_json::to_value(reason)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            tf: String::new(),
            dgar: String::new(),
            irr: String::new(),
            chance: String::new(),
            mode: "",
            n_target: String::new(),
            n_depth_correct: String::new(),
            n_irrelevant: String::new(),
            target_depth: String::new(),
            margin: String::new(),
            adaptive: String::new(),
        },
    }
}

const EXAMPLE_HEADER: [&str; 15] = [
    "example_id",
    "task",
    "status",
    "reason",
    "tf",
    "dgar",
    "irr",
    "chance",
    "mode",
    "n_target",
    "n_depth_correct",
    "n_irrelevant",
    "target_depth",
    "margin",
    "adaptive",
];

#[derive(Serialize)]
struct ModeRow {
    task: TaskId,
    scored: usize,
    excluded: usize,
    target_fixation: usize,
    depth_aware_but_wrong: usize,
    attention_dispersed: usize,
    target_fixation_pct: String,
    depth_aware_but_wrong_pct: String,
    attention_dispersed_pct: String,
    mean_tf: String,
    mean_dgar: String,
    mean_irr: String,
    mean_chance: String,
}

const MODE_HEADER: [&str; 13] = [
    "task",
    "scored",
    "excluded",
    "target_fixation",
    "depth_aware_but_wrong",
    "attention_dispersed",
    "target_fixation_pct",
    "depth_aware_but_wrong_pct",
    "attention_dispersed_pct",
    "mean_tf",
    "mean_dgar",
    "mean_irr",
    "mean_chance",
];

#[derive(Serialize)]
struct LayerRow {
    task: TaskId,
    layer: u32,
    dgar: String,
}

#[derive(Serialize)]
struct LayerHeadRow {
    task: TaskId,
    layer: u32,
    head: usize,
    dgar: String,
}

#[derive(Serialize)]
struct GroundRow {
    task: String,
    corruption: String,
    n: usize,
    grounded: usize,
    marginal: usize,
    ungrounded: usize,
}

#[derive(Serialize)]
struct CurveRow {
    corruption: String,
    site: &'static str,
    stage: String,
    n: usize,
    mean: String,
    ci_low: String,
    ci_high: String,
}

fn enum_str<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn pct(k: usize, n: usize) -> String {
    if n == 0 {
        String::new()
    } else {
        format!("{:.2}", 100.0 * k as f64 / n as f64)
    }
}

pub fn mech_markdown(out: &MechOutcome) -> String {
    let mut md = String::from("# Mechanistic analysis\n\n## Failure modes\n\n");
    md.push_str("| Task | Scored | Excluded | TF | DAW | AD | mean DGAR | chance |\n|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for s in &out.summaries {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            s.task,
            s.scored,
            s.excluded,
            pct(s.modes[0], s.scored),
            pct(s.modes[1], s.scored),
            pct(s.modes[2], s.scored),
            opt(s.mean.map(|m| m.dgar)),
            opt(s.mean_chance),
        );
    }
    md.push_str("\n## Groundedness\n\n| Task | Corruption | n | Grounded | Marginal | Ungrounded |\n|---|---|---:|---:|---:|---:|\n");
    for g in &out.groundedness {
        let task = g.task.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            md,
            "| {task} | {} | {} | {} | {} | {} |",
            enum_str(&g.corruption),
            g.n,
            g.grounded,
            g.marginal,
            g.ungrounded
        );
    }
    md.push_str("\n## Recovery\n\n| Site |");
    for c in out.curves.keys() {
        let _ = write!(md, " {} |", enum_str(c));
    }
    md.push_str("\n|---|");
    md.push_str(&"---:|".repeat(out.curves.len()));
    md.push('\n');
    if let Some(first) = out.curves.values().next() {
        for (k, p) in first.iter().enumerate() {
            let _ = write!(md, "| {} |", p.site.as_str());
            for curve in out.curves.values() {
                let text = curve[k].mean.map(|m| format!("{m:.3}")).unwrap_or_else(|| "-".into());
                let _ = write!(md, " {text} |");
            }
            md.push('\n');
        }
    }
    if !out.skipped.is_empty() {
        let _ = write!(md, "\n{} inputs skipped; see mech.json.\n", out.skipped.len());
    }
    md
}

pub fn write_mech_report(dir: &Path, out: &MechOutcome, manifest: &ReportManifest) -> Result<()> {
    let examples: Vec<ExampleRow> = out.examples.iter().map(example_row).collect();
    write_csv(&dir.join("dgar_examples.csv"), &examples, &EXAMPLE_HEADER)?;

    let modes: Vec<ModeRow> = out
        .summaries
        .iter()
        .map(|s| {
            let mean = |f: fn(&spatialcf_core::mech::Cell) -> f64| opt(s.mean.as_ref().map(f));
            ModeRow {
                task: s.task,
                scored: s.scored,
                excluded: s.excluded,
                target_fixation: s.modes[0],
                depth_aware_but_wrong: s.modes[1],
                attention_dispersed: s.modes[2],
                target_fixation_pct: pct(s.modes[0], s.scored),
                depth_aware_but_wrong_pct: pct(s.modes[1], s.scored),
                attention_dispersed_pct: pct(s.modes[2], s.scored),
                mean_tf: mean(|c| c.tf),
                mean_dgar: mean(|c| c.dgar),
                mean_irr: mean(|c| c.irr),
                mean_chance: opt(s.mean_chance),
            }
        })
        .collect();
    write_csv(&dir.join("dgar_modes.csv"), &modes, &MODE_HEADER)?;

    let layers: Vec<LayerRow> = out
        .summaries
        .iter()
        .flat_map(|s| {
            s.layer_dgar.iter().map(|(&layer, &d)| LayerRow {
                task: s.task,
                layer,
                dgar: opt(Some(d)),
            })
        })
        .collect();
    write_csv(&dir.join("dgar_layers.csv"), &layers, &["task", "layer", "dgar"])?;

    let cells: Vec<LayerHeadRow> = out
        .summaries
        .iter()
        .flat_map(|s| {
            s.layer_head_dgar.iter().flat_map(move |(&layer, heads)| {
                heads.iter().enumerate().map(move |(head, d)| LayerHeadRow {
                    task: s.task,
                    layer,
                    head,
                    dgar: opt(*d),
                })
            })
        })
        .collect();
    write_csv(&dir.join("dgar_layer_head.csv"), &cells, &["task", "layer", "head", "dgar"])?;

    let ground: Vec<GroundRow> = out
        .groundedness
        .iter()
        .map(|g| GroundRow {
            task: g.task.map(|t| t.to_string()).unwrap_or_default(),
            corruption: enum_str(&g.corruption),
            n: g.n,
            grounded: g.grounded,
            marginal: g.marginal,
            ungrounded: g.ungrounded,
        })
        .collect();
    write_csv(
        &dir.join("groundedness.csv"),
        &ground,
        &["task", "corruption", "n", "grounded", "marginal", "ungrounded"],
    )?;

    let curves: Vec<CurveRow> = out
        .curves
        .iter()
        .flat_map(|(c, points)| {
            points.iter().map(move |p| CurveRow {
                corruption: enum_str(c),
                site: p.site.as_str(),
                stage: enum_str(&p.site.stage()),
                n: p.n,
                mean: opt(p.mean),
                ci_low: opt(p.ci.map(|c| c.0)),
                ci_high: opt(p.ci.map(|c| c.1)),
            })
        })
        .collect();
    write_csv(
        &dir.join("recovery.csv"),
        &curves,
        &["corruption", "site", "stage", "n", "mean", "ci_low", "ci_high"],
    )?;

    #[derive(Serialize)]
    struct MechJson<'a> {
        summaries: &'a [spatialcf_core::mech::DgarSummary],
        groundedness: &'a [spatialcf_core::mech::GroundednessRow],
        curves: &'a BTreeMap<spatialcf_core::mech::Corruption, Vec<spatialcf_core::mech::CurvePoint>>,
        skipped: &'a [String],
    }
    fsio::write_json(
        &dir.join("mech.json"),
        &MechJson {
            summaries: &out.summaries,
            groundedness: &out.groundedness,
            curves: &out.curves,
            skipped: &out.skipped,
        },
    )?;
    fsio::write_atomic(&dir.join("mech.md"), mech_markdown(out).as_bytes())?;
    fsio::write_json(&dir.join("manifest.json"), manifest)
}
