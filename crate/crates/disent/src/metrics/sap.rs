//! Separated attribute predictability for discrete factors.
//!
//! Each factor is binarized at its midpoint; S[j][k] is the balanced
//! accuracy of the best single-threshold classifier (both polarities
//! searched) predicting the binarized factor k from latent dimension j. The
//! score is the mean over factors of the gap between the best and
//! second-best dimension.

use crate::error::{Error, Result};

use super::{MetricConfig, RepresentationMatrix};

/// Best balanced accuracy over all thresholds and polarities for predicting
/// binary `labels` from `values`.
fn best_threshold_accuracy(values: &[f64], labels: &[bool]) -> f64 {
    let n = values.len();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5; // degenerate labeling carries no signal
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    // sweep split points; below the split predicts class 0
    let mut pos_below = 0usize;
    let mut neg_below = 0usize;
    let mut best = 0.5f64;
    for (rank, &idx) in order.iter().enumerate() {
        if labels[idx] {
            pos_below += 1;
        } else {
            neg_below += 1;
        }
        // a threshold can only fall between distinct values
        if rank + 1 < n && values[order[rank + 1]] == values[idx] {
            continue;
        }
        let tnr = neg_below as f64 / n_neg as f64;
        let tpr = (n_pos - pos_below) as f64 / n_pos as f64;
        let acc = 0.5 * (tnr + tpr);
        best = best.max(acc.max(1.0 - acc));
    }
    best
}

fn binarize(value: usize, cardinality: usize) -> bool {
    value >= cardinality / 2
}

/// SAP score in [0, 1].
pub fn sap(rep: &RepresentationMatrix, _cfg: &MetricConfig) -> Result<f64> {
    let d = rep.latent_dim();
    if d < 2 {
        return Err(Error::Domain("sap needs at least 2 latent dimensions".into()));
    }
    let k_factors = rep.factor_space.num_factors();
    let n = rep.num_samples();
    let mut total_gap = 0.0;
    for k in 0..k_factors {
        let card = rep.factor_space.cardinalities[k];
        let labels: Vec<bool> = (0..n).map(|i| binarize(rep.factors[[i, k]], card)).collect();
        let mut top = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for j in 0..d {
            let values: Vec<f64> = rep.codes.column(j).to_vec();
            let s = best_threshold_accuracy(&values, &labels);
            if s > top {
                second = top;
                top = s;
            } else if s > second {
                second = s;
            }
        }
        total_gap += top - second;
    }
    Ok((total_gap / k_factors as f64).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FactorSpace;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threshold_search_separates_cleanly_separable_labels() {
        let values = vec![0.1, 0.2, 0.3, 0.8, 0.9, 1.0];
        let labels = vec![false, false, false, true, true, true];
        assert_abs_diff_eq!(best_threshold_accuracy(&values, &labels), 1.0, epsilon = 1e-12);
        // inverted polarity is recovered by the max(acc, 1 - acc) search
        let inverted: Vec<bool> = labels.iter().map(|l| !l).collect();
        assert_abs_diff_eq!(
            best_threshold_accuracy(&values, &inverted),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn threshold_search_on_noise_is_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..2000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let labels: Vec<bool> = (0..2000).map(|_| rng.gen_bool(0.5)).collect();
        let acc = best_threshold_accuracy(&values, &labels);
        assert!((acc - 0.5).abs() < 0.05, "acc = {acc}");
    }

    fn exhaustive_identity_rep() -> RepresentationMatrix {
        let space = FactorSpace::new(vec!["a".into(), "b".into()], vec![4, 6]).unwrap();
        let n = 24;
        let mut codes = Array2::<f64>::zeros((n, 2));
        let mut factors = Array2::<usize>::zeros((n, 2));
        let mut i = 0;
        for x in 0..4 {
            for y in 0..6 {
                factors[[i, 0]] = x;
                factors[[i, 1]] = y;
                codes[[i, 0]] = x as f64;
                codes[[i, 1]] = y as f64;
                i += 1;
            }
        }
        RepresentationMatrix::new(codes, factors, space).unwrap()
    }

    /// Exhaustive threshold-search oracle on the identity representation:
    /// the aligned dim is perfectly separable, the other sits at chance, so
    /// each factor's gap is 0.5.
    #[test]
    fn identity_representation_attains_the_full_gap() {
        let rep = exhaustive_identity_rep();
        let score = sap(&rep, &MetricConfig::default()).unwrap();
        assert_abs_diff_eq!(score, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn duplicated_columns_zero_the_gap() {
        let base = exhaustive_identity_rep();
        let n = base.num_samples();
        let mut codes = Array2::<f64>::zeros((n, 4));
        for i in 0..n {
            codes[[i, 0]] = base.codes[[i, 0]];
            codes[[i, 1]] = base.codes[[i, 1]];
            codes[[i, 2]] = base.codes[[i, 0]];
            codes[[i, 3]] = base.codes[[i, 1]];
        }
        let rep =
            RepresentationMatrix::new(codes, base.factors.clone(), base.factor_space.clone())
                .unwrap();
        let score = sap(&rep, &MetricConfig::default()).unwrap();
        assert_abs_diff_eq!(score, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn noise_representation_scores_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let space = FactorSpace::new(vec!["a".into(), "b".into()], vec![4, 6]).unwrap();
        let n = 5000;
        let mut codes = Array2::<f64>::zeros((n, 5));
        let mut factors = Array2::<usize>::zeros((n, 2));
        for i in 0..n {
            factors[[i, 0]] = rng.gen_range(0..4);
            factors[[i, 1]] = rng.gen_range(0..6);
            for j in 0..5 {
                codes[[i, j]] = rng.gen_range(-1.0..1.0);
            }
        }
        let rep = RepresentationMatrix::new(codes, factors, space).unwrap();
        let score = sap(&rep, &MetricConfig::default()).unwrap();
        assert!(score <= 0.05, "score = {score}");
    }
}
