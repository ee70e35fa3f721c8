// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use spatialcf_core::gen::NounPool;
use spatialcf_core::score::{Responder, T6Mode};
use spatialcf_core::TaskId;

use crate::config::RunConfig;
use crate::dataset;
use crate::error::{Error, Result};
use crate::evaluate;
use crate::fsio;
use crate::query::{self, HttpBackend, QueryRequest, ResponseRecord};
use crate::render;
use crate::report::{self, ReportManifest};

#[derive(Debug, Parser)]
#[command(name = "spatialcf", version, about = "Synthetic spatial-counterfactual benchmark harness")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "SPATIALCF_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scenes and task instances.
    Generate(GenerateArgs),
    /// Re-derive every ground truth and report disagreements.
    Derive(DatasetArgs),
    /// Write each instance's prompt and rendered image.
    Prompts(PromptArgs),
    /// Collect model responses.
    Query(QueryArgs),
    /// Grade responses and write score reports.
    Score(ScoreArgs),
    /// DGAR and recovery analysis over activation bundles and traces.
    Mech(MechArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplier on the reference per-task counts.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Restrict to these tasks.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<TaskId>,
    /// Noun pool file, one noun per line.
    #[arg(long)]
    pub nouns: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write PNG renders.
    #[arg(long)]
    pub images: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ResponderArg {
    Oracle,
    Catalogue,
    Fabricator,
}

impl From<ResponderArg> for Responder {
    fn from(r: ResponderArg) -> Self {
        match r {
            ResponderArg::Oracle => Responder::Oracle,
            ResponderArg::Catalogue => Responder::Catalogue,
            ResponderArg::Fabricator => Responder::Fabricator,
        }
    }
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Responses file (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_inflight: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<u64>,
    /// Answer with a scripted responder instead of a model.
    #[arg(long, value_enum)]
    pub responder: Option<ResponderArg>,
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<TaskId>,
    /// Query at most this many instances per task.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// One or more responses files.
    #[arg(long, required = true, num_args = 1..)]
    pub responses: Vec<PathBuf>,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_enum)]
    pub t6_mode: Option<T6ModeArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum T6ModeArg {
    MinimalValid,
    AnyValid,
}

#[derive(Debug, Args)]
pub struct MechArgs {
    /// Directory of bundle manifests.
    #[arg(long)]
    pub bundles: Option<PathBuf>,
    /// Trace records (JSON Lines).
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub strict: bool,
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} is not a directory", path.display())))
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} does not exist", path.display())))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Generate(a) => generate(cfg, a),
        Command::Derive(a) => derive(a),
        Command::Prompts(a) => prompts(a),
        Command::Query(a) => query_cmd(cfg, a),
        Command::Score(a) => score(cfg, a),
        Command::Mech(a) => mech(a),
    })
}

fn generate(mut cfg: RunConfig, a: GenerateArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.generate.seed = s;
    }
    if let Some(s) = a.scale {
        cfg.generate.scale = s;
    }
    if !a.tasks.is_empty() {
        cfg.generate.tasks = a.tasks;
    }
    let pool = match &a.nouns {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            NounPool::from_text(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => NounPool::bundled(),
    };
    let ds = dataset::generate(&cfg, &pool)?;
    dataset::write(&a.out, &ds)?;
    for (task, s) in &ds.manifest.tasks {
        log::info!("{task}: {} of {} emitted from {} drafts", s.emitted, s.requested, s.drafts);
    }
    println!("wrote {} instances to {}", ds.instances.len(), a.out.display());
    Ok(())
}

fn derive(a: DatasetArgs) -> Result<()> {
    require_dir(&a.dataset)?;
    let ds = dataset::read(&a.dataset)?;
    let mismatches = dataset::rederive(&ds);
    for m in &mismatches {
        log::error!("{}: {}", m.instance_id, m.reason);
    }
    println!("{} instances, {} mismatches", ds.instances.len(), mismatches.len());
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(Error::Data(format!("{} ground truths disagree with re-derivation", mismatches.len())))
    }
}

fn prompts(a: PromptArgs) -> Result<()> {
    require_dir(&a.dataset)?;
    let ds = dataset::read(&a.dataset)?;
    ds.instances
        .par_iter()
        .zip(&ds.scenes)
        .try_for_each(|(inst, scene)| {
            fsio::write_atomic(&a.out.join("prompts").join(format!("{}.txt", inst.id)), inst.prompt.as_bytes())?;
            if a.images {
                let img = render::render_instance(inst, scene)?;
                render::write_png(&a.out.join("images").join(format!("{}.png", inst.id)), &img)?;
            }
            Ok(())
        })
}

fn query_cmd(mut cfg: RunConfig, a: QueryArgs) -> Result<()> {
    require_dir(&a.dataset)?;
    let q = &mut cfg.query;
    if let Some(m) = a.model {
        q.model = m;
    }
    if let Some(e) = a.endpoint {
        q.endpoint = e;
    }
    if let Some(c) = a.cache_dir {
        q.cache_dir = c;
    }
    if let Some(n) = a.max_inflight {
        q.max_inflight = n;
    }
    if let Some(t) = a.timeout {
        q.timeout_secs = t;
    }
    q.validate()?;
    let ds = dataset::read(&a.dataset)?;
    let mut per_task = std::collections::BTreeMap::<TaskId, usize>::new();
    let picked: Vec<usize> = (0..ds.instances.len())
        .filter(|&k| {
            let t = ds.instances[k].task;
            let n = per_task.entry(t).or_default();
            *n += 1;
            (a.tasks.is_empty() || a.tasks.contains(&t)) && a.limit.map_or(true, |l| *n <= l)
        })
        .collect();
    let records: Vec<ResponseRecord> = match a.responder {
        Some(r) => {
            let r = Responder::from(r);
            picked
                .iter()
                .map(|&k| {
                    let inst = &ds.instances[k];
                    ResponseRecord::answered(&inst.id, r.name(), r.respond(inst))
                })
                .collect()
        }
        None => {
            let backend = HttpBackend::new(&cfg.query)?;
            query::run_all(&backend, &cfg.query, picked.len(), |i| {
                let k = picked[i];
                let img = render::render_instance(&ds.instances[k], &ds.scenes[k])?;
                Ok(QueryRequest {
                    instance_id: ds.instances[k].id.clone(),
                    prompt: ds.instances[k].prompt.clone(),
                    image_png: render::encode_png(&img),
                })
            })?
        }
    };
    let unanswered = records
        .iter()
        .filter(|r| r.status == query::Status::Unanswered)
        .count();
    fsio::write_jsonl(&a.out, &records)?;
    println!("{} responses ({unanswered} unanswered) written to {}", records.len(), a.out.display());
    Ok(())
}

fn score(cfg: RunConfig, a: ScoreArgs) -> Result<()> {
    require_dir(&a.dataset)?;
    for p in &a.responses {
        require_file(p)?;
    }
    let mut scoring = cfg.score.scoring();
    if let Some(m) = a.t6_mode {
        scoring.t6_mode = match m {
            T6ModeArg::MinimalValid => T6Mode::MinimalValid,
            T6ModeArg::AnyValid => T6Mode::AnyValid,
        };
    }
    let strict = a.strict || cfg.score.strict;
    let ds = dataset::read(&a.dataset)?;
    let mut responses = Vec::new();
    for p in &a.responses {
        let batch: Vec<ResponseRecord> = fsio::read_jsonl(p)?;
        responses.extend(batch);
    }
    if responses.is_empty() {
        log::warn!("no responses to score");
    }
    let out = evaluate::score(&ds, &responses, &scoring, strict)?;
    let mut manifest = ReportManifest::new("score", ds.manifest.seed, ds.manifest.config_hash.clone())
        .with_input(&a.dataset.join(dataset::INSTANCES_FILE))?;
    for p in &a.responses {
        manifest = manifest.with_input(p)?;
    }
    report::write_score_report(&a.out, &out, &manifest)?;
    print!("{}", report::accuracy_table(&out.rows));
    Ok(())
}

fn mech(a: MechArgs) -> Result<()> {
    if a.bundles.is_none() && a.traces.is_none() {
        return Err(Error::Config("give --bundles, --traces or both".into()));
    }
    if let Some(d) = &a.bundles {
        require_dir(d)?;
    }
    if let Some(t) = &a.traces {
        require_file(t)?;
    }
    let out = evaluate::mech(a.bundles.as_deref(), a.traces.as_deref(), a.seed, a.strict)?;
    let mut manifest = ReportManifest::new("mech", a.seed, String::new());
    if let Some(t) = &a.traces {
        manifest = manifest.with_input(t)?;
    }
    if let Some(d) = &a.bundles {
        for p in crate::bundle_io::list_bundles(d)? {
            manifest = manifest.with_input(&p)?;
        }
    }
    report::write_mech_report(&a.out, &out, &manifest)?;
    print!("{}", report::mech_markdown(&out));
    Ok(())
}
