//! Discretization, plug-in mutual information, and the mutual information
//! gap.

use ndarray::Array2;

use crate::error::{Error, Result};

use super::{MetricConfig, RepresentationMatrix};

/// Equal-width histogram discretization per latent dimension over its
/// empirical range. Constant columns map to bin 0.
pub fn discretize_latents(codes: &Array2<f64>, bins: usize) -> Result<Array2<usize>> {
    if bins < 2 {
        return Err(Error::Config(format!("bins must be >= 2, got {bins}")));
    }
    let (n, d) = codes.dim();
    let mut out = Array2::<usize>::zeros((n, d));
    for j in 0..d {
        let col = codes.column(j);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in col.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi <= lo {
            continue; // constant column: all zeros
        }
        let width = (hi - lo) / bins as f64;
        for (i, &v) in col.iter().enumerate() {
            let b = ((v - lo) / width) as usize;
            out[[i, j]] = b.min(bins - 1);
        }
    }
    Ok(out)
}

/// Plug-in entropy of a label vector, in nats.
pub fn entropy(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let max = labels.iter().max().copied().unwrap_or(0);
    let mut counts = vec![0usize; max + 1];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.ln();
        }
    }
    h
}

/// Plug-in mutual information from joint counts, in nats. Satisfies
/// 0 <= I <= min(H(a), H(b)) and I(a, a) = H(a).
pub fn discrete_mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("mutual information of empty labels".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "label vectors disagree in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut joint = vec![0usize; ka * kb];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b.iter()) {
        joint[x * kb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let n = a.len() as f64;
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0 {
                let p_xy = c as f64 / n;
                let p_x = ca[x] as f64 / n;
                let p_y = cb[y] as f64 / n;
                mi += p_xy * (p_xy / (p_x * p_y)).ln();
            }
        }
    }
    // clip the tiny negative rounding residue of the plug-in estimator
    Ok(mi.max(0.0))
}

/// Mutual information gap: mean over factors of
/// (I_top - I_second) / H(factor) using discretized latents.
pub fn mig(rep: &RepresentationMatrix, cfg: &MetricConfig) -> Result<f64> {
    let d = rep.latent_dim();
    if d < 2 {
        return Err(Error::Domain("mig needs at least 2 latent dimensions".into()));
    }
    let discretized = discretize_latents(&rep.codes, cfg.mig_bins)?;
    let k_factors = rep.factor_space.num_factors();
    let mut total_gap = 0.0;
    for k in 0..k_factors {
        let factor: Vec<usize> = rep.factors.column(k).to_vec();
        let h = entropy(&factor);
        if h <= 0.0 {
            return Err(Error::Domain(format!(
                "factor {k} never varies in the sample"
            )));
        }
        let mut top = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for j in 0..d {
            let code: Vec<usize> = discretized.column(j).to_vec();
            let i = discrete_mutual_information(&code, &factor)?;
            if i > top {
                second = top;
                top = i;
            } else if i > second {
                second = i;
            }
        }
        total_gap += (top - second) / h;
    }
    Ok((total_gap / k_factors as f64).clamp(0.0, 1.0))
}
