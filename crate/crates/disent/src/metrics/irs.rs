//! Interventional robustness: how little a factor-aligned latent dimension
//! moves when all *other* factors are intervened on.
//!
//! For each latent dimension j and factor k, group the samples by the value
//! of factor k; within each group the remaining factors vary, so the spread
//! of dimension j inside a group measures its sensitivity to interventions.
//! The per-group deviation is summarized by a high quantile, averaged over
//! groups, and normalized by the dimension's global maximum deviation:
//! IRS_jk = 1 - E_k[quantile(|z_j - E[z_j | v_k]|)] / max|z_j - E[z_j]|.
//! The score is the variance-weighted mean over dimensions of max_k IRS_jk.

use ndarray::Array2;

use crate::error::{Error, Result};

use super::{MetricConfig, RepresentationMatrix};

/// Linearly interpolated quantile of an unsorted sample.
fn quantile(values: &mut [f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < values.len() {
        values[lo] + frac * (values[lo + 1] - values[lo])
    } else {
        values[lo]
    }
}

/// IRS over raw code and factor matrices. Exposed separately so degenerate
/// factor layouts (including a single factor, which leaves nothing to
/// intervene on) can be scored directly.
pub fn irs_from_parts(
    codes: &Array2<f64>,
    factors: &Array2<usize>,
    diff_quantile: f64,
) -> Result<f64> {
    let (n, d) = codes.dim();
    let k_factors = factors.ncols();
    if factors.nrows() != n {
        return Err(Error::Domain("codes/factors row mismatch".into()));
    }
    if n == 0 {
        return Err(Error::Domain("irs needs at least one sample".into()));
    }

    // global per-dimension statistics
    let mut mean = vec![0.0f64; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += codes[[i, j]] / n as f64;
        }
    }
    let mut max_dev = vec![0.0f64; d];
    let mut variance = vec![0.0f64; d];
    for i in 0..n {
        for j in 0..d {
            let dev = (codes[[i, j]] - mean[j]).abs();
            max_dev[j] = max_dev[j].max(dev);
            variance[j] += dev * dev / n as f64;
        }
    }
    if variance.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateRepresentation(
            "representation has zero variance in every dimension".into(),
        ));
    }

    // cum_dev[j][k]: quantile deviation of dim j within fixed-k groups
    let mut cum_dev = vec![vec![0.0f64; k_factors]; d];
    for k in 0..k_factors {
        let max_value = factors.column(k).iter().max().copied().unwrap_or(0);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); max_value + 1];
        for i in 0..n {
            groups[factors[[i, k]]].push(i);
        }
        let realized: Vec<&Vec<usize>> = groups.iter().filter(|g| !g.is_empty()).collect();
        if realized.len() < 2 {
            return Err(Error::Domain(format!(
                "factor {k} has fewer than 2 realizations in the sample"
            )));
        }
        for j in 0..d {
            let mut acc = 0.0;
            for group in &realized {
                let gmean: f64 =
                    group.iter().map(|&i| codes[[i, j]]).sum::<f64>() / group.len() as f64;
                let mut devs: Vec<f64> =
                    group.iter().map(|&i| (codes[[i, j]] - gmean).abs()).collect();
                acc += quantile(&mut devs, diff_quantile);
            }
            cum_dev[j][k] = acc / realized.len() as f64;
        }
    }

    // variance-weighted mean over dims of the best per-dim factor alignment
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..d {
        if max_dev[j] == 0.0 {
            continue; // constant dim carries zero weight anyway
        }
        let best = (0..k_factors)
            .map(|k| 1.0 - cum_dev[j][k] / max_dev[j])
            .fold(f64::NEG_INFINITY, f64::max);
        num += variance[j] * best;
        den += variance[j];
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// IRS score in [0, 1].
pub fn irs(rep: &RepresentationMatrix, cfg: &MetricConfig) -> Result<f64> {
    irs_from_parts(&rep.codes, &rep.factors, cfg.irs_diff_quantile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FactorSpace;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exhaustive_two_factor(dims_per_factor: impl Fn(usize, usize) -> Vec<f64>) -> (Array2<f64>, Array2<usize>) {
        // 4 x 5 exhaustive grid
        let mut codes_rows = Vec::new();
        let mut factor_rows = Vec::new();
        for a in 0..4usize {
            for b in 0..5usize {
                codes_rows.push(dims_per_factor(a, b));
                factor_rows.push(vec![a, b]);
            }
        }
        let d = codes_rows[0].len();
        let n = codes_rows.len();
        let codes = Array2::from_shape_vec((n, d), codes_rows.concat()).unwrap();
        let factors = Array2::from_shape_vec((n, 2), factor_rows.concat()).unwrap();
        (codes, factors)
    }

    /// Each dim a function of exactly one factor: interventions on the other
    /// factor do not move it at all, so the score is exactly 1.
    #[test]
    fn pure_per_factor_dims_score_one() {
        let (codes, factors) = exhaustive_two_factor(|a, b| vec![a as f64 * 2.0, b as f64 - 1.5]);
        let score = irs_from_parts(&codes, &factors, 0.99).unwrap();
        assert_abs_diff_eq!(score, 1.0, epsilon = 1e-12);
    }

    /// Dims mixing two factors equally are strictly penalized.
    #[test]
    fn mixed_dims_score_below_pure_dims() {
        let (codes, factors) =
            exhaustive_two_factor(|a, b| vec![a as f64 + b as f64, a as f64 - b as f64]);
        let score = irs_from_parts(&codes, &factors, 0.99).unwrap();
        assert!(score < 0.9, "score = {score}");
    }

    /// With a single factor there is nothing to intervene on; a dim copying
    /// that factor is perfectly robust.
    #[test]
    fn single_factor_copy_scores_one() {
        let codes = Array2::from_shape_vec((6, 1), vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]).unwrap();
        let factors = Array2::from_shape_vec((6, 1), vec![0usize, 0, 1, 1, 2, 2]).unwrap();
        let score = irs_from_parts(&codes, &factors, 0.99).unwrap();
        assert_abs_diff_eq!(score, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_variance_representation_is_degenerate() {
        let codes = Array2::<f64>::zeros((10, 3));
        let mut factors = Array2::<usize>::zeros((10, 2));
        for i in 0..10 {
            factors[[i, 0]] = i % 2;
            factors[[i, 1]] = i % 3;
        }
        assert!(matches!(
            irs_from_parts(&codes, &factors, 0.99),
            Err(Error::DegenerateRepresentation(_))
        ));
    }

    #[test]
    fn missing_realizations_are_a_domain_error() {
        let codes = Array2::from_shape_vec((4, 2), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
            .unwrap();
        let mut factors = Array2::<usize>::zeros((4, 2));
        for i in 0..4 {
            factors[[i, 0]] = i % 2;
            factors[[i, 1]] = 1; // single realization
        }
        assert!(matches!(
            irs_from_parts(&codes, &factors, 0.99),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn irs_via_representation_matrix_matches_raw_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let space = FactorSpace::new(vec!["a".into(), "b".into()], vec![3, 4]).unwrap();
        let n = 300;
        let mut codes = Array2::<f64>::zeros((n, 2));
        let mut factors = Array2::<usize>::zeros((n, 2));
        for i in 0..n {
            let a = rng.gen_range(0..3);
            let b = rng.gen_range(0..4);
            factors[[i, 0]] = a;
            factors[[i, 1]] = b;
            codes[[i, 0]] = a as f64 + 0.01 * rng.gen_range(-1.0..1.0);
            codes[[i, 1]] = b as f64 + 0.01 * rng.gen_range(-1.0..1.0);
        }
        let rep = RepresentationMatrix::new(codes.clone(), factors.clone(), space).unwrap();
        let cfg = MetricConfig::default();
        assert_eq!(
            irs(&rep, &cfg).unwrap(),
            irs_from_parts(&codes, &factors, cfg.irs_diff_quantile).unwrap()
        );
    }

    #[test]
    fn quantile_matches_linear_interpolation() {
        let mut v = vec![3.0, 1.0, 2.0, 4.0];
        assert_abs_diff_eq!(quantile(&mut v, 0.5), 2.5, epsilon = 1e-12);
        let mut v2 = vec![1.0, 2.0];
        assert_abs_diff_eq!(quantile(&mut v2, 0.99), 1.99, epsilon = 1e-12);
        let mut v3 = vec![7.0];
        assert_abs_diff_eq!(quantile(&mut v3, 0.99), 7.0, epsilon = 1e-12);
    }
}
