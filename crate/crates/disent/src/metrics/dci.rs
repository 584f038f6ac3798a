//! Disentanglement / Completeness / Informativeness from the importance
//! matrix of per-factor predictors.
//!
//! The predictor is a depth-limited random forest with gini-decrease
//! importances. Rows of the d x K importance matrix score how concentrated
//! each latent dimension's predictive power is (disentanglement); columns
//! score how concentrated each factor's explanation is (completeness);
//! held-out classification accuracy is the informativeness.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::forest::{Forest, ForestConfig};
use super::{MetricConfig, RepresentationMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DciScores {
    pub disentanglement: f64,
    pub completeness: f64,
    pub informativeness: f64,
}

fn normalized_entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || weights.len() < 2 {
        return 0.0;
    }
    let mut h = 0.0;
    for &w in weights {
        if w > 0.0 {
            let p = w / total;
            h -= p * p.ln();
        }
    }
    h / (weights.len() as f64).ln()
}

/// Disentanglement from a d x K importance matrix: per-dimension
/// (1 - normalized row entropy), weighted by relative row mass.
pub fn disentanglement_from_importance(importance: &Array2<f64>) -> f64 {
    let total: f64 = importance.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut score = 0.0;
    for row in importance.rows() {
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let weights: Vec<f64> = row.to_vec();
        score += mass / total * (1.0 - normalized_entropy(&weights));
    }
    score
}

/// Completeness: the column-wise mirror of
/// [`disentanglement_from_importance`].
pub fn completeness_from_importance(importance: &Array2<f64>) -> f64 {
    let total: f64 = importance.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut score = 0.0;
    for col_idx in 0..importance.ncols() {
        let col: Vec<f64> = importance.column(col_idx).to_vec();
        let mass: f64 = col.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        score += mass / total * (1.0 - normalized_entropy(&col));
    }
    score
}

/// Runs the full DCI protocol on a representation.
pub fn dci(rep: &RepresentationMatrix, cfg: &MetricConfig, rng: &mut ChaCha8Rng) -> Result<DciScores> {
    let n = rep.num_samples();
    let d = rep.latent_dim();
    let k_factors = rep.factor_space.num_factors();
    let n_test = ((n as f64) * cfg.dci_test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Domain(format!(
            "dci split leaves an empty side: {n} samples at test fraction {}",
            cfg.dci_test_fraction
        )));
    }

    // shuffled split
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(rng, 0..=i);
        order.swap(i, j);
    }
    let (test_idx, train_idx) = order.split_at(n_test);

    let gather = |indices: &[usize]| -> Array2<f64> {
        let mut x = Array2::<f64>::zeros((indices.len(), d));
        for (r, &i) in indices.iter().enumerate() {
            for j in 0..d {
                x[[r, j]] = rep.codes[[i, j]];
            }
        }
        x
    };
    let x_train = gather(train_idx);
    let x_test = gather(test_idx);

    let mut importance = Array2::<f64>::zeros((d, k_factors));
    let mut informativeness = 0.0;
    for k in 0..k_factors {
        let y_train: Vec<usize> = train_idx.iter().map(|&i| rep.factors[[i, k]]).collect();
        let y_test: Vec<usize> = test_idx.iter().map(|&i| rep.factors[[i, k]]).collect();
        let forest = Forest::fit(
            &x_train,
            &y_train,
            rep.factor_space.cardinalities[k],
            &ForestConfig::default(),
            rng,
        );
        for (j, &imp) in forest.importances().iter().enumerate() {
            importance[[j, k]] = imp;
        }
        informativeness += forest.accuracy(&x_test, &y_test) / k_factors as f64;
    }

    if importance.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateRepresentation(
            "importance matrix is all zero; no dimension predicts any factor".into(),
        ));
    }

    Ok(DciScores {
        disentanglement: disentanglement_from_importance(&importance).clamp(0.0, 1.0),
        completeness: completeness_from_importance(&importance).clamp(0.0, 1.0),
        informativeness: informativeness.clamp(0.0, 1.0),
    })
}
