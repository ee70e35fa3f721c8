// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration, read from TOML. Every section and field is optional.
//!
//! ```toml
//! jobs = 8
//!
//! [generate]
//! seed = 7
//! scale = 0.1
//! counts = { T2 = 40 }        # overrides the scaled count per task
//!
//! [generate.gen]
//! occlusion_objects = 12
//! gate = { tau_occ = 0.05, min_depth_gradient = 0.5, depth_band = 0.2 }
//!
//! [query]
//! endpoint = "https://openrouter.ai/api/v1/chat/completions"
//! model = "qwen/qwen3-vl-8b-instruct"
//! thinking_flag = "enable_thinking"
//! thinking_value = false
//! max_inflight = 4
//!
//! [score]
//! t6_mode = "minimal_valid"
//! strict = false
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spatialcf_core::gen::GenConfig;
use spatialcf_core::score::{ScoringConfig, T6Mode};
use spatialcf_core::TaskId;

use crate::error::{Error, Result};
use crate::fsio::sha256_hex;

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub generate: GenerateConfig,
    pub query: QueryConfig,
    pub score: ScoreConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub seed: u64,
    /// Multiplier on the reference per-task counts.
    pub scale: f64,
    pub counts: BTreeMap<TaskId, usize>,
    pub tasks: Vec<TaskId>,
    pub gen: GenConfig,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            seed: DEFAULT_SEED,
            scale: 1.0,
            counts: BTreeMap::new(),
            tasks: TaskId::ALL.to_vec(),
            gen: GenConfig::default(),
        }
    }
}

impl GenerateConfig {
    pub fn count(&self, task: TaskId) -> usize {
        self.counts
            .get(&task)
            .copied()
            .unwrap_or_else(|| task.scaled_count(self.scale))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    /// Request-body field that toggles reasoning, if the endpoint has one.
    pub thinking_flag: Option<String>,
    pub thinking_value: serde_json::Value,
    pub timeout_secs: u64,
    /// Attempts after the first.
    pub retries: u32,
    /// First backoff delay; doubles per retry up to `max_backoff_ms`.
    pub backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub max_inflight: usize,
    pub cache_dir: PathBuf,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for QueryConfig {
    fn default() -> Self {
        QueryConfig {
            endpoint: "https://openrouter.ai/api/v1/chat/completions".into(),
            model: String::new(),
            temperature: 0.0,
            thinking_flag: None,
            thinking_value: serde_json::Value::Bool(false),
            timeout_secs: 120,
            retries: 3,
            backoff_ms: 500,
            max_backoff_ms: 30_000,
            max_inflight: 4,
            cache_dir: PathBuf::from("cache"),
            api_key_env: "SPATIALCF_API_KEY".into(),
        }
    }
}

impl QueryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature != 0.0 {
            return Err(Error::Config("temperature must be 0".into()));
        }
        if self.max_inflight == 0 {
            return Err(Error::Config("max_inflight must be positive".into()));
        }
        if self.timeout_secs == 0 {
            return Err(Error::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub t6_mode: T6Mode,
    /// Fail on orphan responses and malformed inputs instead of skipping.
    pub strict: bool,
}

impl ScoreConfig {
    pub fn scoring(&self) -> ScoringConfig {
        ScoringConfig {
            t6_mode: self.t6_mode,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Load `path` if given, else defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn validate(&self) -> Result<()> {
        self.generate
            .gen
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.generate.scale.is_finite() && self.generate.scale >= 0.0) {
            return Err(Error::Config("scale must be a non-negative number".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the generation settings.
    pub fn generation_hash(&self) -> String {
        let json = serde_json::to_string(&self.generate).expect("config serializes");
        sha256_hex(json.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = RunConfig::from_toml(
            "[generate]\nscale = 0.1\ncounts = { T2 = 40 }\n[generate.gen.gate]\ntau_occ = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.generate.count(TaskId::T1), 60);
        assert_eq!(cfg.generate.count(TaskId::T2), 40);
        assert_eq!(cfg.generate.gen.gate.tau_occ, 0.1);
        assert_eq!(cfg.generate.gen.gate.depth_band, 0.2);
        assert_eq!(cfg.query.max_inflight, 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[generate]\nsede = 1\n").is_err());
        assert!(RunConfig::from_toml("[score]\nt6 = 1\n").is_err());
        let cfg = RunConfig::from_toml("[score]\nt6_mode = \"any_valid\"\n").unwrap();
        assert_eq!(cfg.score.scoring().t6_mode, T6Mode::AnyValid);
    }

    #[test]
    fn nonzero_temperature_is_a_config_error() {
        let q = QueryConfig {
            temperature: 0.7,
            ..QueryConfig::default()
        };
        assert!(matches!(q.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_tracks_generation_settings_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.query.model = "other".into();
        assert_eq!(a.generation_hash(), b.generation_hash());
        b.generate.seed += 1;
        assert_ne!(a.generation_hash(), b.generation_hash());
    }
}
