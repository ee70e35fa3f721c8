// SPDX-License-Identifier: MIT OR Apache-2.0

//! Causal-tracing records: groundedness under corruption and per-site
//! recovery of the clean top-1 probability.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::task::TaskId;

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;

/// Denominators below this make the recovery score undefined.
const MIN_DENOMINATOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Site {
    V0,
    V6,
    V12,
    V18,
    V23,
    M,
    DS0,
    DS1,
    DS2,
    L0,
    L4,
    L8,
    L12,
    L16,
    L20,
    L24,
    L27,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Vit,
    Merger,
    Lm,
}

impl Site {
    /// Vision blocks, then mergers, then decoder layers.
    pub const ALL: [Site; 17] = [
        Site::V0,
        Site::V6,
        Site::V12,
        Site::V18,
        Site::V23,
        Site::M,
        Site::DS0,
        Site::DS1,
        Site::DS2,
        Site::L0,
        Site::L4,
        Site::L8,
        Site::L12,
        Site::L16,
        Site::L20,
        Site::L24,
        Site::L27,
    ];

    pub fn as_str(self) -> &'static str {
        const NAMES: [&str; 17] = [
            "V0", "V6", "V12", "V18", "V23", "M", "DS0", "DS1", "DS2", "L0", "L4", "L8", "L12",
            "L16", "L20", "L24", "L27",
        ];
        NAMES[self as usize]
    }

    pub fn stage(self) -> Stage {
        match self {
            Site::V0 | Site::V6 | Site::V12 | Site::V18 | Site::V23 => Stage::Vit,
            Site::M | Site::DS0 | Site::DS1 | Site::DS2 => Stage::Merger,
            _ => Stage::Lm,
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Site {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Site::ALL
            .into_iter()
            .find(|site| site.as_str() == s)
            .ok_or_else(|| TraceError::UnknownSite(s.into()))
    }
}

/// A: target-object patches. B: depth-correct patches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Corruption {
    A,
    B,
}

impl Corruption {
    pub const ALL: [Corruption; 2] = [Corruption::A, Corruption::B];
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("unknown site `{0}`")]
    UnknownSite(String),
    #[error("{example}: corruption {corruption:?} is missing site {site}")]
    MissingSite {
        example: String,
        corruption: Corruption,
        site: Site,
    },
    #[error("{example}: {field} = {value} is not a probability")]
    Probability {
        example: String,
        field: String,
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionTrace {
    pub p_corr: f64,
    pub argmax_flipped: bool,
    /// Restored probability per site label.
    pub p_rest: BTreeMap<Site, f64>,
}

/// One example's causal-tracing measurements (one JSON line).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub example_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskId>,
    /// Top-1 token id of the clean run.
    pub top1_token: u32,
    pub p_clean: f64,
    pub corruptions: BTreeMap<Corruption, CorruptionTrace>,
}

impl TraceRecord {
    pub fn validate(&self) -> Result<(), TraceError> {
        let prob = |field: String, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(TraceError::Probability {
                    example: self.example_id.clone(),
                    field,
                    value: v,
                })
            }
        };
        prob("p_clean".into(), self.p_clean)?;
        for (&c, t) in &self.corruptions {
            prob(alloc::format!("{c:?}.p_corr"), t.p_corr)?;
            for site in Site::ALL {
                let v = t.p_rest.get(&site).ok_or(TraceError::MissingSite {
                    example: self.example_id.clone(),
                    corruption: c,
                    site,
                })?;
                prob(alloc::format!("{c:?}.p_rest.{site}"), *v)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Groundedness {
    Grounded,
    Marginal,
    Ungrounded,
}

/// Strict thresholds: grounded iff `Δp > 0.05` or the argmax flipped,
/// ungrounded iff `Δp < 0.01` and it did not. `None` if `c` was not run.
pub fn groundedness(record: &TraceRecord, c: Corruption) -> Option<Groundedness> {
    let t = record.corruptions.get(&c)?;
    let dp = record.p_clean - t.p_corr;
    Some(if dp > 0.05 || t.argmax_flipped {
        Groundedness::Grounded
    } else if dp < 0.01 {
        Groundedness::Ungrounded
    } else {
        Groundedness::Marginal
    })
}

/// `S = (p_rest − p_corr) / (p_clean − p_corr)`, for grounded examples with
/// a usable denominator.
pub fn recovery(record: &TraceRecord, c: Corruption, site: Site) -> Option<f64> {
    if groundedness(record, c)? != Groundedness::Grounded {
        return None;
    }
    let t = &record.corruptions[&c];
    let denom = record.p_clean - t.p_corr;
    if libm::fabs(denom) < MIN_DENOMINATOR {
        return None;
    }
    Some((t.p_rest.get(&site)? - t.p_corr) / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub site: Site,
    pub n: usize,
    pub mean: Option<f64>,
    /// Percentile bootstrap 95% interval; omitted below two examples.
    pub ci: Option<(f64, f64)>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean recovery per site over grounded examples, with a seeded
/// percentile bootstrap (`resamples` draws, one RNG stream per site).
pub fn recovery_curves(
    records: &[TraceRecord],
    c: Corruption,
    resamples: usize,
    seed: u64,
) -> Vec<CurvePoint> {
    Site::ALL
        .into_iter()
        .map(|site| {
            let values: Vec<f64> = records.iter().filter_map(|r| recovery(r, c, site)).collect();
            let n = values.len();
            if n == 0 {
                return CurvePoint {
                    site,
                    n,
                    mean: None,
                    ci: None,
                };
            }
            let ci = (n >= 2 && resamples > 0).then(|| {
                let salt = (c as u64) << 8 | site as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(crate::mix_seed(seed, salt));
                let mut means: Vec<f64> = (0..resamples)
                    .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
                    .collect();
                means.sort_by(f64::total_cmp);
                (quantile(&means, 0.025), quantile(&means, 0.975))
            });
            CurvePoint {
                site,
                n,
                mean: Some(mean(&values)),
                ci,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundednessRow {
    pub task: Option<TaskId>,
    pub corruption: Corruption,
    pub n: usize,
    pub grounded: usize,
    pub marginal: usize,
    pub ungrounded: usize,
}

/// Groundedness counts per (task, corruption); records lacking a
/// corruption do not count towards its rows.
pub fn groundedness_table(records: &[TraceRecord]) -> Vec<GroundednessRow> {
    let mut rows: BTreeMap<(Option<TaskId>, Corruption), [usize; 3]> = BTreeMap::new();
    for r in records {
        for c in Corruption::ALL {
            if let Some(g) = groundedness(r, c) {
                rows.entry((r.task, c)).or_default()[g as usize] += 1;
            }
        }
    }
    rows.into_iter()
        .map(|((task, corruption), [g, m, u])| GroundednessRow {
            task,
            corruption,
            n: g + m + u,
            grounded: g,
            marginal: m,
            ungrounded: u,
        })
        .collect()
}
