//! Disentanglement metrics: FactorVAE score, MIG, SAP, DCI, and IRS.
//!
//! All metrics consume a [`RepresentationMatrix`] (latent codes paired with
//! ground-truth factor labels); the FactorVAE score additionally drives the
//! dataset's fixed-factor sampler through a [`Representation`]. Every score
//! lies in [0, 1] and is deterministic under a fixed seed.

mod dci;
mod factor_vae;
mod forest;
mod irs;
mod mi;
mod sap;

pub use dci::{completeness_from_importance, dci, disentanglement_from_importance, DciScores};
pub use factor_vae::{factor_vae_score, factor_vae_score_from_rep};
pub use irs::{irs, irs_from_parts};
pub use mi::{discrete_mutual_information, discretize_latents, entropy, mig};
pub use sap::sap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{FactorSpace, FactorTuple, GroundTruthDataset};
use crate::error::{Error, Result};

/// Latent codes aligned row-by-row with the factor configurations that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationMatrix {
    /// n x d latent codes.
    pub codes: Array2<f64>,
    /// n x K integer factor values.
    pub factors: Array2<usize>,
    pub factor_space: FactorSpace,
}

impl RepresentationMatrix {
    pub fn new(
        codes: Array2<f64>,
        factors: Array2<usize>,
        factor_space: FactorSpace,
    ) -> Result<Self> {
        if codes.nrows() != factors.nrows() {
            return Err(Error::Domain(format!(
                "codes have {} rows but factors have {}",
                codes.nrows(),
                factors.nrows()
            )));
        }
        if factors.ncols() != factor_space.num_factors() {
            return Err(Error::Domain(format!(
                "factor matrix has {} columns, space has {} factors",
                factors.ncols(),
                factor_space.num_factors()
            )));
        }
        if codes.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("codes must be finite".into()));
        }
        for (k, &card) in factor_space.cardinalities.iter().enumerate() {
            if factors.column(k).iter().any(|&v| v >= card) {
                return Err(Error::Domain(format!("factor {k} value out of range")));
            }
        }
        Ok(Self {
            codes,
            factors,
            factor_space,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.codes.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.codes.ncols()
    }

    /// Writes the rep as CSV with columns z0..z{d-1}, f0..f{K-1}.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = Vec::new();
        for j in 0..self.latent_dim() {
            header.push(format!("z{j}"));
        }
        for k in 0..self.factor_space.num_factors() {
            header.push(format!("f{k}"));
        }
        w.write_record(&header)?;
        for i in 0..self.num_samples() {
            let mut row = Vec::new();
            for j in 0..self.latent_dim() {
                row.push(format!("{:.16e}", self.codes[[i, j]]));
            }
            for k in 0..self.factor_space.num_factors() {
                row.push(self.factors[[i, k]].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a rep CSV (columns z0..z{d-1}, f0..f{K-1}); factor cardinalities
    /// are inferred as max value + 1 unless a space is supplied.
    pub fn read_csv(path: &std::path::Path, space: Option<FactorSpace>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let mut z_cols = Vec::new();
        let mut f_cols = Vec::new();
        for (idx, name) in headers.iter().enumerate() {
            if let Some(stripped) = name.strip_prefix('z') {
                if stripped.parse::<usize>().is_ok() {
                    z_cols.push(idx);
                    continue;
                }
            }
            if let Some(stripped) = name.strip_prefix('f') {
                if stripped.parse::<usize>().is_ok() {
                    f_cols.push(idx);
                }
            }
        }
        if z_cols.is_empty() || f_cols.is_empty() {
            return Err(Error::Schema(
                "rep CSV needs z0..z{d-1} and f0..f{K-1} columns".into(),
            ));
        }
        let mut codes = Vec::new();
        let mut factors = Vec::new();
        let mut n = 0;
        for record in reader.records() {
            let record = record?;
            for &c in &z_cols {
                codes.push(
                    record[c]
                        .parse::<f64>()
                        .map_err(|e| Error::Schema(format!("bad code value: {e}")))?,
                );
            }
            for &c in &f_cols {
                factors.push(
                    record[c]
                        .parse::<usize>()
                        .map_err(|e| Error::Schema(format!("bad factor value: {e}")))?,
                );
            }
            n += 1;
        }
        let codes = Array2::from_shape_vec((n, z_cols.len()), codes)
            .map_err(|e| Error::Schema(e.to_string()))?;
        let factors = Array2::from_shape_vec((n, f_cols.len()), factors)
            .map_err(|e| Error::Schema(e.to_string()))?;
        let space = match space {
            Some(s) => s,
            None => {
                let cards: Vec<usize> = (0..factors.ncols())
                    .map(|k| factors.column(k).iter().max().map_or(2, |&m| (m + 1).max(2)))
                    .collect();
                FactorSpace::new(
                    (0..factors.ncols()).map(|k| format!("f{k}")).collect(),
                    cards,
                )?
            }
        };
        Self::new(codes, factors, space)
    }
}

/// Protocol constants for all five metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    #[serde(default = "d_fv_votes_train")]
    pub fv_votes_train: usize,
    #[serde(default = "d_fv_votes_eval")]
    pub fv_votes_eval: usize,
    /// Observations per vote.
    #[serde(default = "d_fv_batch")]
    pub fv_batch: usize,
    /// Latent dims with global std below this are treated as collapsed.
    #[serde(default = "d_prune_std")]
    pub prune_std_threshold: f64,
    #[serde(default = "d_mig_bins")]
    pub mig_bins: usize,
    /// Sample count for the shared representation pass.
    #[serde(default = "d_mig_samples")]
    pub mig_samples: usize,
    #[serde(default = "d_dci_test_fraction")]
    pub dci_test_fraction: f64,
    #[serde(default = "d_irs_quantile")]
    pub irs_diff_quantile: f64,
    #[serde(default)]
    pub seed: u64,
}

fn d_fv_votes_train() -> usize {
    800
}
fn d_fv_votes_eval() -> usize {
    400
}
fn d_fv_batch() -> usize {
    64
}
fn d_prune_std() -> f64 {
    0.05
}
fn d_mig_bins() -> usize {
    20
}
fn d_mig_samples() -> usize {
    10_000
}
fn d_dci_test_fraction() -> f64 {
    0.2
}
fn d_irs_quantile() -> f64 {
    0.99
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            fv_votes_train: d_fv_votes_train(),
            fv_votes_eval: d_fv_votes_eval(),
            fv_batch: d_fv_batch(),
            prune_std_threshold: d_prune_std(),
            mig_bins: d_mig_bins(),
            mig_samples: d_mig_samples(),
            dci_test_fraction: d_dci_test_fraction(),
            irs_diff_quantile: d_irs_quantile(),
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fv_votes_train == 0 || self.fv_votes_eval == 0 || self.fv_batch == 0 {
            return Err(Error::Config("vote counts must be positive".into()));
        }
        if self.mig_bins < 2 {
            return Err(Error::Config("mig_bins must be at least 2".into()));
        }
        if self.mig_samples == 0 {
            return Err(Error::Config("mig_samples must be positive".into()));
        }
        if !(self.dci_test_fraction > 0.0 && self.dci_test_fraction < 1.0) {
            return Err(Error::Config("dci_test_fraction must lie in (0, 1)".into()));
        }
        if !(self.irs_diff_quantile > 0.0 && self.irs_diff_quantile <= 1.0) {
            return Err(Error::Config("irs_diff_quantile must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Anything that can map factor configurations to latent codes. Trained
/// models render the observations and encode them; test oracles may compute
/// codes directly from the factor values.
pub trait Representation {
    fn latent_dim(&self) -> usize;

    fn codes_for(
        &self,
        dataset: &GroundTruthDataset,
        factors: &[FactorTuple],
    ) -> Result<Array2<f64>>;
}

/// The five scores reported by every experiment table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub factor_vae: f64,
    pub sap: f64,
    pub dci: f64,
    pub irs: f64,
    pub mig: f64,
}

impl MetricReport {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("factor_vae", self.factor_vae),
            ("sap", self.sap),
            ("dci", self.dci),
            ("irs", self.irs),
            ("mig", self.mig),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("metric {name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        (self.factor_vae + self.sap + self.dci + self.irs + self.mig) / 5.0
    }
}

/// Full evaluation output: the five table scores plus the DCI sub-components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub report: MetricReport,
    pub dci_completeness: f64,
    pub dci_informativeness: f64,
}

/// Runs all five metrics off one shared representation pass. The reported
/// `dci` value is the disentanglement component; completeness and
/// informativeness ride along in the output.
pub fn evaluate_all(
    model: &dyn Representation,
    dataset: &GroundTruthDataset,
    cfg: &MetricConfig,
    rng: &mut ChaCha8Rng,
) -> Result<EvalOutput> {
    cfg.validate()?;
    let rep = crate::training::encode_dataset(model, dataset, cfg.mig_samples, rng)?;

    let fv = factor_vae_score(model, dataset, cfg, rng).map_err(|e| e.in_metric("factor_vae"))?;
    let mig_score = mig(&rep, cfg).map_err(|e| e.in_metric("mig"))?;
    let sap_score = sap(&rep, cfg).map_err(|e| e.in_metric("sap"))?;
    let dci_scores = dci(&rep, cfg, rng).map_err(|e| e.in_metric("dci"))?;
    let irs_score = irs(&rep, cfg).map_err(|e| e.in_metric("irs"))?;

    let report = MetricReport {
        factor_vae: fv,
        sap: sap_score,
        dci: dci_scores.disentanglement,
        irs: irs_score,
        mig: mig_score,
    };
    report.validate()?;
    Ok(EvalOutput {
        report,
        dci_completeness: dci_scores.completeness,
        dci_informativeness: dci_scores.informativeness,
    })
}

/// Evaluates all five metrics from an already-materialized representation
/// table (the `eval` CLI path); the FactorVAE protocol resamples its votes
/// from the table's empirical conditionals.
pub fn evaluate_rep(rep: &RepresentationMatrix, cfg: &MetricConfig) -> Result<EvalOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fv =
        factor_vae_score_from_rep(rep, cfg, &mut rng).map_err(|e| e.in_metric("factor_vae"))?;
    let mig_score = mig(rep, cfg).map_err(|e| e.in_metric("mig"))?;
    let sap_score = sap(rep, cfg).map_err(|e| e.in_metric("sap"))?;
    let dci_scores = dci(rep, cfg, &mut rng).map_err(|e| e.in_metric("dci"))?;
    let irs_score = irs(rep, cfg).map_err(|e| e.in_metric("irs"))?;
    let report = MetricReport {
        factor_vae: fv,
        sap: sap_score,
        dci: dci_scores.disentanglement,
        irs: irs_score,
        mig: mig_score,
    };
    report.validate()?;
    Ok(EvalOutput {
        report,
        dci_completeness: dci_scores.completeness,
        dci_informativeness: dci_scores.informativeness,
    })
}
