//! Run configuration: a JSON file whose sections mirror the library
//! configs, with command-line flags applied on top.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use xmodal_core::embedding_io::SynthSpec;
use xmodal_core::linker::LinkerConfig;
use xmodal_core::metrics::EvalOptions;
use xmodal_core::retrieval::DEFAULT_SHRINKAGE;
use xmodal_core::trainer::TrainConfig;

use crate::UsageError;

pub const SEED_ENV: &str = "XMODAL_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineOptions {
    pub target_dim: usize,
    pub shrinkage: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            target_dim: 128,
            shrinkage: DEFAULT_SHRINKAGE,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every section's seed when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub synth: SynthSpec,
    pub linker: LinkerConfig,
    pub train: TrainConfig,
    pub eval: EvalOptions,
    pub baseline: BaselineOptions,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }

    /// Seed precedence: flag, then the config's top-level `seed`, then
    /// `XMODAL_SEED`, then whatever the section already holds.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<Option<u64>> {
        let env = match std::env::var(SEED_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| UsageError(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?,
            ),
            Err(_) => None,
        };
        let seed = flag.or(self.seed).or(env);
        if let Some(s) = seed {
            self.seed = Some(s);
            self.synth.seed = s;
            self.train.seed = s;
        }
        Ok(seed)
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"train": {"epochs": 3}, "bogus": 1}"#).unwrap();
        assert!(RunConfig::load(Some(&p)).is_err());
        fs::write(&p, r#"{"train": {"epochs": 3, "loss_mode": "cts_spk"}}"#).unwrap();
        let c = RunConfig::load(Some(&p)).unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.linker, LinkerConfig::default());
    }

    #[test]
    fn flag_seed_wins() {
        let mut c = RunConfig {
            seed: Some(4),
            ..RunConfig::default()
        };
        assert_eq!(c.resolve_seed(Some(9)).unwrap(), Some(9));
        assert_eq!((c.synth.seed, c.train.seed), (9, 9));
        let mut c = RunConfig {
            seed: Some(4),
            ..RunConfig::default()
        };
        assert_eq!(c.resolve_seed(None).unwrap(), Some(4));
    }
}
