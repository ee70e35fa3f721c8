// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded procedural scene generation.
//!
//! Every sampler is a pure function of `(template, seed, pool, config)`.
//! Drafts that fail a validity check are resampled from a derived seed, up
//! to [`GenConfig::draft_budget`] drafts per scene, and each failed draft is
//! reported to the caller's tally.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::RejectionReason;
use crate::occlusion::{self, GateConfig, GateOutcome, OcclusionError};
use crate::scene::{
    base_noun, Camera, ReflectiveSurface, Scene, SceneObject, SceneRaster, TemplateFamily,
    TemplateId,
};
use crate::swap::{self, T5Reject, T6Outcome};
use crate::truth;

const BUNDLED_NOUNS: &str = include_str!("../data/nouns.txt");

pub const OCCLUSION_TEMPLATES: [&str; 15] = [
    "kitchen counter",
    "dining table",
    "office desk",
    "hallway console",
    "mudroom bench",
    "craft room",
    "living room shelf",
    "garage workbench",
    "bathroom vanity",
    "bedroom dresser",
    "laundry room",
    "pantry shelf",
    "nursery",
    "study",
    "patio table",
];

pub const REFLECTION_TEMPLATES: [&str; 20] = [
    "polished oak",
    "polished walnut",
    "polished maple",
    "polished cherry",
    "black granite",
    "grey granite",
    "speckled granite",
    "kitchen granite",
    "white marble",
    "carrara marble",
    "green marble",
    "black marble",
    "white quartz",
    "grey quartz",
    "sparkle quartz",
    "kitchen quartz",
    "clear glass",
    "smoked glass",
    "frosted glass",
    "mirrored glass",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("noun pool has {available} entries, {needed} needed")]
    NounPoolExhausted { needed: usize, available: usize },
    #[error("noun pool entries `{0}` and `{1}` share a base-type noun")]
    DuplicatePoolNoun(String, String),
    #[error("no valid draft within {0} attempts")]
    BudgetExhausted(usize),
    #[error("template index {index} out of range for {family:?}")]
    UnknownTemplate { family: TemplateFamily, index: u8 },
    #[error("wrong template family for this sampler")]
    WrongFamily,
    #[error("{0} objects need more chains than lateral slots allow")]
    TooManyObjects(usize),
    #[error("invalid generation config: {0}")]
    InvalidConfig(&'static str),
}

/// Depth → fraction-of-frame-height targets for occlusion-chain positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthTargetTable {
    entries: Vec<(f64, f64)>,
}

impl Default for DepthTargetTable {
    fn default() -> Self {
        DepthTargetTable {
            entries: alloc::vec![(1.0, 0.50), (2.0, 0.25), (3.0, 0.15), (4.0, 0.08), (5.0, 0.05)],
        }
    }
}

impl DepthTargetTable {
    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// Linear interpolation between entries; `1/z` falloff past either end.
    pub fn fraction_at(&self, depth: f64) -> f64 {
        let (first, last) = (self.entries[0], self.entries[self.entries.len() - 1]);
        if depth <= first.0 {
            return first.1;
        }
        if depth >= last.0 {
            return last.1 * last.0 / depth;
        }
        for w in self.entries.windows(2) {
            let ((d0, f0), (d1, f1)) = (w[0], w[1]);
            if depth <= d1 {
                let t = (depth - d0) / (d1 - d0);
                return f0 + t * (f1 - f0);
            }
        }
        last.1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub id: TemplateId,
    pub name: String,
    /// Number of objects for occlusion scenes; 7 for reflection scenes.
    pub n_objects: usize,
    pub chain_min: usize,
    pub chain_max: usize,
    /// Floor (or surface) height, meters.
    pub floor_y: f64,
}

impl SceneTemplate {
    pub fn occlusion(index: u8) -> Result<Self, GenError> {
        let name = index
            .checked_sub(1)
            .and_then(|i| OCCLUSION_TEMPLATES.get(i as usize))
            .ok_or(GenError::UnknownTemplate {
                family: TemplateFamily::Occlusion,
                index,
            })?;
        Ok(SceneTemplate {
            id: TemplateId {
                family: TemplateFamily::Occlusion,
                index,
            },
            name: (*name).into(),
            n_objects: 12,
            chain_min: 3,
            chain_max: 5,
            floor_y: -0.25 - 0.01 * f64::from(index % 4),
        })
    }

    pub fn reflection(index: u8) -> Result<Self, GenError> {
        let name = index
            .checked_sub(1)
            .and_then(|i| REFLECTION_TEMPLATES.get(i as usize))
            .ok_or(GenError::UnknownTemplate {
                family: TemplateFamily::Reflection,
                index,
            })?;
        Ok(SceneTemplate {
            id: TemplateId {
                family: TemplateFamily::Reflection,
                index,
            },
            name: (*name).into(),
            n_objects: 7,
            chain_min: 0,
            chain_max: 0,
            floor_y: -0.30 - 0.01 * f64::from(index % 4),
        })
    }

    pub fn with_objects(mut self, n_objects: usize) -> Self {
        self.n_objects = n_objects;
        self
    }
}

/// Missing fields take their [`Default`] values when deserializing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Relative jitter of projected height around the depth target.
    pub height_jitter: f64,
    /// Absolute jitter of chain-member depth around its canonical depth, meters.
    pub depth_jitter: f64,
    /// Lateral jitter of chain members within a slot, pixels.
    pub lateral_jitter_px: f64,
    pub draft_budget: usize,
    /// Objects per occlusion scene.
    pub occlusion_objects: usize,
    /// Probability of keeping a draft whose multi-swap target is
    /// unreachable. Unreachable targets dominate raw draws.
    pub t6_infeasible_share: f64,
    /// Minimum uncovered patch pixels for a reflection to count as visible.
    pub min_reflection_pixels: usize,
    pub gate: GateConfig,
    pub depth_targets: DepthTargetTable,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            height_jitter: 0.10,
            depth_jitter: 0.10,
            lateral_jitter_px: 8.0,
            draft_budget: 200,
            occlusion_objects: 12,
            t6_infeasible_share: 0.02,
            min_reflection_pixels: 1,
            gate: GateConfig::default(),
            depth_targets: DepthTargetTable::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.occlusion_objects < 3 {
            return Err(GenError::InvalidConfig("occlusion_objects must be at least 3"));
        }
        if !(0.0..1.0).contains(&self.height_jitter) {
            return Err(GenError::InvalidConfig("height_jitter must be in [0, 1)"));
        }
        if !(0.0..0.4).contains(&self.depth_jitter) {
            return Err(GenError::InvalidConfig("depth_jitter must be in [0, 0.4)"));
        }
        if !(0.0..=1.0).contains(&self.t6_infeasible_share) {
            return Err(GenError::InvalidConfig("t6_infeasible_share must be in [0, 1]"));
        }
        if self.draft_budget == 0 {
            return Err(GenError::InvalidConfig("draft_budget must be positive"));
        }
        self.gate
            .validate()
            .map_err(|_| GenError::InvalidConfig("gate thresholds must be positive"))
    }
}

/// Noun phrases with pairwise-distinct base-type nouns.
#[derive(Clone, Debug, PartialEq)]
pub struct NounPool {
    nouns: Vec<String>,
}

impl NounPool {
    /// One noun phrase per line; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self, GenError> {
        let mut nouns: Vec<String> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let phrase: String = line.split_whitespace().collect::<Vec<_>>().join(" ");
            if let Some(prev) = nouns.iter().find(|n| base_noun(n) == base_noun(&phrase)) {
                return Err(GenError::DuplicatePoolNoun(prev.clone(), phrase));
            }
            nouns.push(phrase);
        }
        Ok(NounPool { nouns })
    }

    pub fn bundled() -> Self {
        NounPool::from_text(BUNDLED_NOUNS).expect("bundled noun pool is valid")
    }

    pub fn len(&self) -> usize {
        self.nouns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nouns.is_empty()
    }

    pub fn nouns(&self) -> &[String] {
        &self.nouns
    }

    /// `n` distinct entries, without replacement.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<String>, GenError> {
        if n > self.nouns.len() {
            return Err(GenError::NounPoolExhausted {
                needed: n,
                available: self.nouns.len(),
            });
        }
        Ok(index::sample(rng, self.nouns.len(), n)
            .into_iter()
            .map(|i| self.nouns[i].clone())
            .collect())
    }
}

pub const LATERAL_SLOTS: usize = 9;
/// Extra depth for chains that reuse an already occupied lateral slot.
const SLOT_REUSE_OFFSET: f64 = 0.5;

fn draft_rng(seed: u64, attempt: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, attempt as u64))
}

/// Random composition of `n` into parts of length `min..=max`.
fn chain_lengths<R: Rng>(rng: &mut R, n: usize, min: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut remaining = n;
    while remaining > 0 {
        let options: Vec<usize> = (min..=max)
            .filter(|&l| l <= remaining && (remaining - l == 0 || remaining - l >= min))
            .collect();
        let len = if options.is_empty() {
            remaining
        } else {
            options[rng.gen_range(0..options.len())]
        };
        out.push(len);
        remaining -= len;
    }
    out
}

/// Geometry of one occlusion draft before gating. `chains` lists object ids
/// front to back.
struct OcclusionDraft {
    scene: Scene,
    chains: Vec<Vec<usize>>,
}

fn draft_occlusion<R: Rng>(
    template: &SceneTemplate,
    seed: u64,
    rng: &mut R,
    pool: &NounPool,
    cfg: &GenConfig,
) -> Result<OcclusionDraft, GenError> {
    let cam = Camera::default();
    let n = template.n_objects;
    let labels = pool.draw(rng, n)?;
    let lengths = chain_lengths(rng, n, template.chain_min, template.chain_max);
    if lengths.len() > 2 * LATERAL_SLOTS {
        return Err(GenError::TooManyObjects(n));
    }
    let mut slots: Vec<usize> = (0..LATERAL_SLOTS).collect();
    for i in (1..slots.len()).rev() {
        slots.swap(i, rng.gen_range(0..=i));
    }
    let slot_width = cam.width() as f64 / LATERAL_SLOTS as f64;
    let frame_h = cam.height() as f64;

    let mut objects = Vec::with_capacity(n);
    let mut chains = Vec::with_capacity(lengths.len());
    for (c, &len) in lengths.iter().enumerate() {
        let slot = slots[c % LATERAL_SLOTS];
        let offset = SLOT_REUSE_OFFSET * (c / LATERAL_SLOTS) as f64;
        let mut chain = Vec::with_capacity(len);
        for k in 0..len {
            let canonical = (k + 1) as f64 + offset;
            let z = canonical + rng.gen_range(-cfg.depth_jitter..=cfg.depth_jitter);
            let fraction = cfg.depth_targets.fraction_at(canonical)
                * (1.0 + rng.gen_range(-cfg.height_jitter..=cfg.height_jitter));
            let height = cam.meters_for_pixels(fraction * frame_h, z);
            let width_px = rng.gen_range(48.0..96.0);
            let center = (slot as f64 + 0.5) * slot_width
                + rng.gen_range(-cfg.lateral_jitter_px..=cfg.lateral_jitter_px);
            let center = center.clamp(width_px / 2.0 + 1.0, cam.width() as f64 - width_px / 2.0 - 1.0);
            let id = objects.len();
            objects.push(SceneObject {
                id,
                label: labels[id].clone(),
                x_center: cam.x_at(center, z),
                y_base: template.floor_y,
                width: cam.meters_for_pixels(width_px, z),
                height,
                z_front: z,
                z_extent: rng.gen_range(0.15..0.6),
            });
            chain.push(id);
        }
        chains.push(chain);
    }
    Ok(OcclusionDraft {
        scene: Scene {
            camera: cam,
            objects,
            surface: None,
            template: template.id,
            seed,
        },
        chains,
    })
}

fn gate_occlusion(draft: &OcclusionDraft, cfg: &GateConfig) -> Result<(), RejectionReason> {
    if draft.scene.validate().is_err() {
        return Err(RejectionReason::OutOfFrame);
    }
    let raster = SceneRaster::new(&draft.scene).map_err(|_| RejectionReason::OutOfFrame)?;
    let graph = match occlusion::build_graph(&raster, cfg) {
        Ok(g) => g,
        Err(OcclusionError::DepthTie(..)) => return Err(RejectionReason::DepthTie),
        Err(_) => return Err(RejectionReason::OutOfFrame),
    };
    if let GateOutcome::Reject(reason) = occlusion::validate(&raster, &graph, cfg) {
        return Err(reason.into());
    }
    for chain in &draft.chains {
        for pair in chain.windows(2) {
            if !graph.has_edge(pair[0], pair[1]) {
                return Err(RejectionReason::ChainBreak);
            }
        }
    }
    Ok(())
}

pub fn sample_occlusion_scene(
    template: &SceneTemplate,
    seed: u64,
    pool: &NounPool,
    cfg: &GenConfig,
) -> Result<Scene, GenError> {
    sample_occlusion_scene_tallied(template, seed, pool, cfg, &mut Vec::new())
}

/// Like [`sample_occlusion_scene`], recording every rejected draft.
pub fn sample_occlusion_scene_tallied(
    template: &SceneTemplate,
    seed: u64,
    pool: &NounPool,
    cfg: &GenConfig,
    tally: &mut Vec<RejectionReason>,
) -> Result<Scene, GenError> {
    if template.id.family != TemplateFamily::Occlusion {
        return Err(GenError::WrongFamily);
    }
    cfg.validate()?;
    for attempt in 0..cfg.draft_budget {
        let mut rng = draft_rng(seed, attempt);
        let draft = draft_occlusion(template, seed, &mut rng, pool, cfg)?;
        match gate_occlusion(&draft, &cfg.gate) {
            Ok(()) => return Ok(draft.scene),
            Err(reason) => tally.push(reason),
        }
    }
    Err(GenError::BudgetExhausted(cfg.draft_budget))
}

fn reflection_surface(template: &SceneTemplate) -> ReflectiveSurface {
    ReflectiveSurface {
        y0: template.floor_y,
        x_range: [-1.0, 1.0],
        z_range: [1.2, 3.4],
        material: template.name.clone(),
    }
}

fn footprints_clear(a: &SceneObject, b: &SceneObject, margin: f64) -> bool {
    let [a0, a1] = a.x_interval();
    let [b0, b1] = b.x_interval();
    let x_clear = a1 + margin <= b0 || b1 + margin <= a0;
    let z_clear = a.z_back() + margin <= b.z_front || b.z_back() + margin <= a.z_front;
    x_clear || z_clear
}

fn draft_reflection<R: Rng>(
    template: &SceneTemplate,
    seed: u64,
    rng: &mut R,
    pool: &NounPool,
) -> Result<Result<Scene, RejectionReason>, GenError> {
    const PLACEMENT_TRIES: usize = 64;
    let cam = Camera::default();
    let surface = reflection_surface(template);
    let labels = pool.draw(rng, template.n_objects)?;
    let mut objects: Vec<SceneObject> = Vec::with_capacity(labels.len());
    for label in labels {
        let mut placed = None;
        for _ in 0..PLACEMENT_TRIES {
            let width = rng.gen_range(0.12..0.28);
            let z_extent = rng.gen_range(0.08..0.22);
            let z_front = rng.gen_range(surface.z_range[0] + 0.1..surface.z_range[1] - z_extent - 0.05);
            let half_span = surface.x_range[1] - width / 2.0 - 0.05;
            let candidate = SceneObject {
                id: objects.len(),
                label: label.clone(),
                x_center: rng.gen_range(-half_span..half_span),
                y_base: surface.y0,
                width,
                height: rng.gen_range(0.10..0.32),
                z_front,
                z_extent,
            };
            let in_frame = candidate
                .front_face(&cam)
                .inside_frame(cam.width(), cam.height());
            if in_frame && objects.iter().all(|o| footprints_clear(o, &candidate, 0.02)) {
                placed = Some(candidate);
                break;
            }
        }
        match placed {
            Some(obj) => objects.push(obj),
            None => return Ok(Err(RejectionReason::PlacementFailed)),
        }
    }
    Ok(Ok(Scene {
        camera: cam,
        objects,
        surface: Some(surface),
        template: template.id,
        seed,
    }))
}

pub fn sample_reflection_scene(
    template: &SceneTemplate,
    seed: u64,
    pool: &NounPool,
    cfg: &GenConfig,
) -> Result<(Scene, [usize; 2]), GenError> {
    sample_reflection_scene_tallied(template, seed, pool, cfg, &mut Vec::new())
}

pub fn sample_reflection_scene_tallied(
    template: &SceneTemplate,
    seed: u64,
    pool: &NounPool,
    cfg: &GenConfig,
    tally: &mut Vec<RejectionReason>,
) -> Result<(Scene, [usize; 2]), GenError> {
    if template.id.family != TemplateFamily::Reflection {
        return Err(GenError::WrongFamily);
    }
    cfg.validate()?;
    for attempt in 0..cfg.draft_budget {
        let mut rng = draft_rng(seed, attempt);
        let scene = match draft_reflection(template, seed, &mut rng, pool)? {
            Ok(scene) => scene,
            Err(reason) => {
                tally.push(reason);
                continue;
            }
        };
        if scene.validate().is_err() {
            tally.push(RejectionReason::OutOfFrame);
            continue;
        }
        let visible = truth::reflection_pixels(&scene).unwrap_or_default();
        if visible.len() != scene.objects.len()
            || visible.iter().any(|&px| px < cfg.min_reflection_pixels)
        {
            tally.push(RejectionReason::ReflectionHidden);
            continue;
        }
        let n = scene.objects.len();
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        return Ok((scene, [a.min(b), a.max(b)]));
    }
    Err(GenError::BudgetExhausted(cfg.draft_budget))
}

/// Which planning task a scene is drawn for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanningKind {
    SingleSwap,
    MultiSwap,
}

fn draft_planning<R: Rng>(
    template: &SceneTemplate,
    seed: u64,
    rng: &mut R,
    pool: &NounPool,
    n_objects: usize,
) -> Result<Scene, GenError> {
    let cam = Camera::default();
    let labels = pool.draw(rng, n_objects)?;
    let widths: Vec<f64> = (0..n_objects).map(|_| rng.gen_range(0.12..0.50)).collect();
    let gaps: Vec<f64> = (1..n_objects).map(|_| rng.gen_range(0.02..0.20)).collect();
    let total: f64 = widths.iter().sum::<f64>() + gaps.iter().sum::<f64>();
    let mut left = -total / 2.0 + rng.gen_range(-0.1..0.1);
    let mut objects = Vec::with_capacity(n_objects);
    for (id, label) in labels.into_iter().enumerate() {
        let width = widths[id];
        objects.push(SceneObject {
            id,
            label,
            x_center: left + width / 2.0,
            y_base: template.floor_y,
            width,
            height: rng.gen_range(0.15..0.45),
            z_front: rng.gen_range(1.9..2.1),
            z_extent: rng.gen_range(0.35..0.50),
        });
        left += width + gaps.get(id).copied().unwrap_or(0.0);
    }
    Ok(Scene {
        camera: cam,
        objects,
        surface: None,
        template: template.id,
        seed,
    })
}

pub fn sample_planning_scene(
    template: &SceneTemplate,
    seed: u64,
    pool: &NounPool,
    cfg: &GenConfig,
    kind: PlanningKind,
    n_objects: usize,
) -> Result<(Scene, Vec<String>), GenError> {
    sample_planning_scene_tallied(template, seed, pool, cfg, kind, n_objects, &mut Vec::new())
}

pub fn sample_planning_scene_tallied(
    template: &SceneTemplate,
    seed: u64,
    pool: &NounPool,
    cfg: &GenConfig,
    kind: PlanningKind,
    n_objects: usize,
    tally: &mut Vec<RejectionReason>,
) -> Result<(Scene, Vec<String>), GenError> {
    if template.id.family != TemplateFamily::Occlusion {
        return Err(GenError::WrongFamily);
    }
    if n_objects < 2 {
        return Err(GenError::InvalidConfig("planning scenes need at least two objects"));
    }
    cfg.validate()?;
    for attempt in 0..cfg.draft_budget {
        let mut rng = draft_rng(seed, attempt);
        let scene = draft_planning(template, seed, &mut rng, pool, n_objects)?;
        if scene.validate().is_err() {
            tally.push(RejectionReason::OutOfFrame);
            continue;
        }
        if swap::first_overlap(&scene.objects).is_some() {
            tally.push(RejectionReason::InitialOverlap);
            continue;
        }
        let current = scene.left_to_right();
        match kind {
            PlanningKind::SingleSwap => {
                let a = rng.gen_range(0..n_objects);
                let mut b = rng.gen_range(0..n_objects - 1);
                if b >= a {
                    b += 1;
                }
                let mut target = current.clone();
                target.swap(a, b);
                match swap::solve_t5(&scene, &target) {
                    Ok(_) => return Ok((scene, target)),
                    Err(T5Reject::Ambiguous) => tally.push(RejectionReason::T5Ambiguous),
                    Err(_) => tally.push(RejectionReason::T5NoSwap),
                }
            }
            PlanningKind::MultiSwap => {
                let mut target = current.clone();
                while target == current {
                    for i in (1..target.len()).rev() {
                        target.swap(i, rng.gen_range(0..=i));
                    }
                }
                match swap::solve_t6(&scene, &target) {
                    Ok(T6Outcome::Unique(plan)) if plan.len() >= 2 => return Ok((scene, target)),
                    Ok(T6Outcome::Infeasible) => {
                        if rng.gen_bool(cfg.t6_infeasible_share) {
                            return Ok((scene, target));
                        }
                        tally.push(RejectionReason::T6InfeasibleQuota);
                    }
                    Ok(T6Outcome::Unique(_)) => tally.push(RejectionReason::T6TooShort),
                    Ok(T6Outcome::Ambiguous { .. }) => tally.push(RejectionReason::T6Ambiguous),
                    Err(_) => tally.push(RejectionReason::T6TooShort),
                }
            }
        }
    }
    Err(GenError::BudgetExhausted(cfg.draft_budget))
}
