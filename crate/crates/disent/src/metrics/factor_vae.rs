//! FactorVAE score: majority-vote accuracy of identifying the fixed factor
//! from the least-varying normalized latent dimension.
//!
//! Protocol: estimate each dimension's global std from a large random
//! sample; drop dimensions whose std falls below the prune threshold (they
//! carry no signal); then, per vote, fix one uniformly chosen factor, draw a
//! batch sharing that factor value, and record the argmin of the per-dim
//! variance of the normalized codes. Training votes build a
//! dim -> factor majority table; the score is the table's accuracy on fresh
//! votes. All argmin/argmax ties break to the lowest index.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::GroundTruthDataset;
use crate::error::{Error, Result};

use super::{MetricConfig, Representation, RepresentationMatrix};

/// Sample count used to estimate the per-dimension global std.
const GLOBAL_STD_SAMPLES: usize = 10_000;

fn population_std(codes: &Array2<f64>) -> Vec<f64> {
    let (n, d) = codes.dim();
    let mut mean = vec![0.0f64; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += codes[[i, j]] / n as f64;
        }
    }
    let mut var = vec![0.0f64; d];
    for i in 0..n {
        for j in 0..d {
            let diff = codes[[i, j]] - mean[j];
            var[j] += diff * diff / n as f64;
        }
    }
    var.into_iter().map(f64::sqrt).collect()
}

fn active_dims(stds: &[f64], threshold: f64) -> Result<Vec<usize>> {
    let active: Vec<usize> = (0..stds.len()).filter(|&j| stds[j] >= threshold).collect();
    if active.is_empty() {
        return Err(Error::DegenerateRepresentation(format!(
            "all {} latent dimensions fall below the std threshold {threshold}",
            stds.len()
        )));
    }
    Ok(active)
}

/// Index (within `active`) of the dimension with the smallest variance of
/// normalized codes; ties break to the lowest index.
fn least_varying_dim(codes: &Array2<f64>, active: &[usize], stds: &[f64]) -> usize {
    let n = codes.nrows();
    let mut best = 0;
    let mut best_var = f64::INFINITY;
    for (slot, &j) in active.iter().enumerate() {
        let mut mean = 0.0;
        for i in 0..n {
            mean += codes[[i, j]] / stds[j] / n as f64;
        }
        let mut var = 0.0;
        for i in 0..n {
            let diff = codes[[i, j]] / stds[j] - mean;
            var += diff * diff / n as f64;
        }
        if var < best_var {
            best_var = var;
            best = slot;
        }
    }
    best
}

fn score_votes(
    votes: &[(usize, usize)],
    n_slots: usize,
    n_factors: usize,
    n_train: usize,
) -> f64 {
    let mut counts = vec![vec![0usize; n_factors]; n_slots];
    for &(slot, k) in votes.iter().take(n_train) {
        counts[slot][k] += 1;
    }
    // majority table; ties and unseen slots resolve to the lowest factor
    let table: Vec<usize> = counts
        .iter()
        .map(|row| {
            let mut best = 0;
            for (k, &c) in row.iter().enumerate() {
                if c > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    let eval = &votes[n_train..];
    let correct = eval.iter().filter(|&&(slot, k)| table[slot] == k).count();
    correct as f64 / eval.len() as f64
}

/// FactorVAE score driven by a live model: fixed-factor batches are sampled
/// from the dataset and encoded on the fly.
pub fn factor_vae_score(
    model: &dyn Representation,
    dataset: &GroundTruthDataset,
    cfg: &MetricConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    cfg.validate()?;
    let tuples = dataset.sample_factors(GLOBAL_STD_SAMPLES, rng);
    let codes = model.codes_for(dataset, &tuples)?;
    let stds = population_std(&codes);
    let active = active_dims(&stds, cfg.prune_std_threshold)?;

    let n_factors = dataset.factor_space().num_factors();
    let total_votes = cfg.fv_votes_train + cfg.fv_votes_eval;
    let mut votes = Vec::with_capacity(total_votes);
    for _ in 0..total_votes {
        let k = rng.gen_range(0..n_factors);
        let (_, batch) = dataset.sample_fixed_factor(k, cfg.fv_batch, rng)?;
        let batch_codes = model.codes_for(dataset, &batch)?;
        votes.push((least_varying_dim(&batch_codes, &active, &stds), k));
    }
    Ok(score_votes(&votes, active.len(), n_factors, cfg.fv_votes_train))
}

/// FactorVAE score from a static representation table: votes are resampled
/// from the table's empirical conditionals (rows sharing a factor value).
pub fn factor_vae_score_from_rep(
    rep: &RepresentationMatrix,
    cfg: &MetricConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    cfg.validate()?;
    let stds = population_std(&rep.codes);
    let active = active_dims(&stds, cfg.prune_std_threshold)?;

    let n = rep.num_samples();
    let n_factors = rep.factor_space.num_factors();
    let d = rep.latent_dim();

    // rows grouped by (factor, value)
    let mut groups: Vec<Vec<Vec<usize>>> = (0..n_factors)
        .map(|k| vec![Vec::new(); rep.factor_space.cardinalities[k]])
        .collect();
    for i in 0..n {
        for k in 0..n_factors {
            groups[k][rep.factors[[i, k]]].push(i);
        }
    }

    let total_votes = cfg.fv_votes_train + cfg.fv_votes_eval;
    let mut votes = Vec::with_capacity(total_votes);
    for _ in 0..total_votes {
        let k = rng.gen_range(0..n_factors);
        let value = rng.gen_range(0..rep.factor_space.cardinalities[k]);
        let pool = &groups[k][value];
        if pool.is_empty() {
            return Err(Error::Domain(format!(
                "factor {k} value {value} never occurs in the representation table"
            )));
        }
        let mut batch = Array2::<f64>::zeros((cfg.fv_batch, d));
        for row in 0..cfg.fv_batch {
            let i = pool[rng.gen_range(0..pool.len())];
            for j in 0..d {
                batch[[row, j]] = rep.codes[[i, j]];
            }
        }
        votes.push((least_varying_dim(&batch, &active, &stds), k));
    }
    Ok(score_votes(&votes, active.len(), n_factors, cfg.fv_votes_train))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, DatasetSpec, FactorTuple};
    use rand::SeedableRng;

    /// Oracle representation: codes are affine images of the factor values,
    /// optionally with duplicated columns or constant output.
    pub(crate) struct FactorOracle {
        pub scales: Vec<f64>,
        pub duplicate: bool,
        pub constant: bool,
    }

    impl Representation for FactorOracle {
        fn latent_dim(&self) -> usize {
            if self.duplicate {
                2 * self.scales.len()
            } else {
                self.scales.len()
            }
        }

        fn codes_for(
            &self,
            _dataset: &GroundTruthDataset,
            factors: &[FactorTuple],
        ) -> Result<Array2<f64>> {
            let k = self.scales.len();
            let d = self.latent_dim();
            let mut codes = Array2::<f64>::zeros((factors.len(), d));
            if self.constant {
                return Ok(codes);
            }
            for (i, t) in factors.iter().enumerate() {
                for j in 0..k {
                    codes[[i, j]] = t.values[j] as f64 * self.scales[j];
                    if self.duplicate {
                        codes[[i, k + j]] = t.values[j] as f64 * self.scales[j];
                    }
                }
            }
            Ok(codes)
        }
    }

    fn quick_cfg() -> MetricConfig {
        MetricConfig {
            fv_votes_train: 100,
            fv_votes_eval: 50,
            fv_batch: 16,
            ..Default::default()
        }
    }

    #[test]
    fn identity_oracle_scores_exactly_one() {
        let ds = build_dataset(DatasetSpec::default()).unwrap();
        let oracle = FactorOracle {
            scales: vec![1.0; 5],
            duplicate: false,
            constant: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let score = factor_vae_score(&oracle, &ds, &quick_cfg(), &mut rng).unwrap();
        assert_eq!(score, 1.0);
    }

    #[test]
    fn duplicated_columns_still_score_one_via_tie_break() {
        let ds = build_dataset(DatasetSpec::default()).unwrap();
        let oracle = FactorOracle {
            scales: vec![1.0; 5],
            duplicate: true,
            constant: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let score = factor_vae_score(&oracle, &ds, &quick_cfg(), &mut rng).unwrap();
        assert_eq!(score, 1.0);
    }

    #[test]
    fn constant_representation_is_degenerate() {
        let ds = build_dataset(DatasetSpec::default()).unwrap();
        let oracle = FactorOracle {
            scales: vec![1.0; 5],
            duplicate: false,
            constant: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(
            factor_vae_score(&oracle, &ds, &quick_cfg(), &mut rng),
            Err(Error::DegenerateRepresentation(_))
        ));
    }

    #[test]
    fn score_is_deterministic_under_fixed_seed() {
        let ds = build_dataset(DatasetSpec::default()).unwrap();
        let oracle = FactorOracle {
            scales: vec![2.0, 1.0, 0.5, 1.5, 3.0],
            duplicate: false,
            constant: false,
        };
        let mut rng_a = ChaCha8Rng::seed_from_u64(3);
        let mut rng_b = ChaCha8Rng::seed_from_u64(3);
        let a = factor_vae_score(&oracle, &ds, &quick_cfg(), &mut rng_a).unwrap();
        let b = factor_vae_score(&oracle, &ds, &quick_cfg(), &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rep_table_path_scores_identity_perfectly() {
        let ds = build_dataset(DatasetSpec::default()).unwrap();
        let oracle = FactorOracle {
            scales: vec![1.0; 5],
            duplicate: false,
            constant: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rep = crate::training::encode_dataset(&oracle, &ds, 4000, &mut rng).unwrap();
        let score = factor_vae_score_from_rep(&rep, &quick_cfg(), &mut rng).unwrap();
        assert_eq!(score, 1.0);
    }
}
