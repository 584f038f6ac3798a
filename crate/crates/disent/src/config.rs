//! Experiment config file: TOML with sections [dataset], [model],
//! [regularizer], [train], [sweep], and [metrics]. Every field has a
//! default, so a minimal config can be a single section or even empty.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetSpec;
use crate::error::{Error, Result};
use crate::metrics::MetricConfig;
use crate::regularizers::{DiscriminatorConfig, RegKind, RegularizerConfig};
use crate::runner::{RegOverride, SweepSpec};
use crate::training::TrainConfig;
use crate::vae::ModelConfig;

/// The `[train]` section: loop hyper-parameters plus the optional
/// `[train.discriminator]` sub-table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    #[serde(default = "d_steps")]
    pub steps: u64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "d_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "d_disc_beta1")]
    pub disc_beta1: f64,
    #[serde(default = "d_disc_beta2")]
    pub disc_beta2: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub discriminator: DiscriminatorConfig,
}

fn d_steps() -> u64 {
    20_000
}
fn d_batch() -> usize {
    64
}
fn d_lr() -> f64 {
    1e-4
}
fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_disc_beta1() -> f64 {
    0.5
}
fn d_disc_beta2() -> f64 {
    0.9
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            steps: d_steps(),
            batch_size: d_batch(),
            learning_rate: d_lr(),
            adam_beta1: d_beta1(),
            adam_beta2: d_beta2(),
            disc_beta1: d_disc_beta1(),
            disc_beta2: d_disc_beta2(),
            seed: 0,
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

/// The `[sweep]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    #[serde(default = "d_kinds")]
    pub kinds: Vec<String>,
    #[serde(default = "d_latent_dims")]
    pub latent_dims: Vec<usize>,
    #[serde(default = "d_step_counts")]
    pub steps: Vec<u64>,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "d_out_dir")]
    pub out_dir: String,
    /// Per-kind hyper-parameter overrides, e.g. `[sweep.overrides.factor]`.
    #[serde(default)]
    pub overrides: BTreeMap<String, RegOverride>,
}

fn d_kinds() -> Vec<String> {
    vec!["beta".into(), "factor".into()]
}
fn d_latent_dims() -> Vec<usize> {
    vec![8, 16, 32]
}
fn d_step_counts() -> Vec<u64> {
    vec![5_000, 20_000]
}
fn d_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn d_out_dir() -> String {
    "runs".into()
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            kinds: d_kinds(),
            latent_dims: d_latent_dims(),
            steps: d_step_counts(),
            seeds: d_seeds(),
            out_dir: d_out_dir(),
            overrides: BTreeMap::new(),
        }
    }
}

/// The `[regularizer]` section: a kind plus optional hyper-parameter
/// overrides applied on top of that kind's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSection {
    pub kind: String,
    #[serde(flatten)]
    pub overrides: RegOverride,
}

impl RegularizerSection {
    pub fn resolve(&self) -> Result<RegularizerConfig> {
        let kind = RegKind::parse(&self.kind)?;
        let mut cfg = RegularizerConfig::defaults_for(kind);
        self.overrides.apply(&mut cfg);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub regularizer: Option<RegularizerSection>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub metrics: MetricConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&content)?;
        Ok(cfg)
    }

    /// Assembles the full training config for a single `train` invocation.
    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            steps: self.train.steps,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            adam_beta1: self.train.adam_beta1,
            adam_beta2: self.train.adam_beta2,
            disc_beta1: self.train.disc_beta1,
            disc_beta2: self.train.disc_beta2,
            seed: self.train.seed,
            model: self.model.clone(),
            regularizer: match &self.regularizer {
                Some(section) => section.resolve()?,
                None => RegularizerConfig::defaults_for(RegKind::Factor),
            },
            discriminator: self.train.discriminator.clone(),
        })
    }

    /// Assembles the sweep spec from the `[sweep]` section (or its defaults).
    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let section = self.sweep.clone().unwrap_or_default();
        let kinds = section
            .kinds
            .iter()
            .map(|s| RegKind::parse(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepSpec {
            dataset: self.dataset.clone(),
            kinds,
            latent_dims: section.latent_dims,
            step_counts: section.steps,
            seeds: section.seeds,
            base: self.train_config()?,
            overrides: section.overrides,
            metrics: self.metrics.clone(),
            out_dir: PathBuf::from(section.out_dir),
        })
    }
}

/// Parses a TOML string directly (used by tests and embedded configs).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(Error::Toml)
}
