//! Regularization terms of the VAE family, in minimization form.
//!
//! Each kind defines the full regularization column that gets added to the
//! reconstruction loss:
//!
//! - `beta`: `beta * KL`
//! - `annealed`: `gamma * |KL - C(t)|` with a linearly growing capacity C(t)
//! - `factor`: `KL + gamma * TC`, TC estimated by a density-ratio
//!   discriminator trained against per-column permuted latents
//! - `dip_i` / `dip_ii`: `KL + lambda_od * sum off-diag Cov^2 +
//!   lambda_d * sum (diag Cov - 1)^2` over the covariance of mu / of z
//! - `btc`: minibatch-weighted decomposition `MI + beta * TC + DWKL`
//!
//! With `beta = 1`, `gamma = 0`, or `lambda = 0` each kind collapses back to
//! the plain bound.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{leaky_relu, leaky_relu_backward, Element, Linear};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    Beta,
    Annealed,
    Factor,
    DipI,
    DipII,
    Btc,
}

impl RegKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegKind::Beta => "beta",
            RegKind::Annealed => "annealed",
            RegKind::Factor => "factor",
            RegKind::DipI => "dip_i",
            RegKind::DipII => "dip_ii",
            RegKind::Btc => "btc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(RegKind::Beta),
            "annealed" => Ok(RegKind::Annealed),
            "factor" => Ok(RegKind::Factor),
            "dip_i" => Ok(RegKind::DipI),
            "dip_ii" => Ok(RegKind::DipII),
            "btc" => Ok(RegKind::Btc),
            other => Err(Error::Config(format!("unknown regularizer kind '{other}'"))),
        }
    }

    /// Kinds whose penalty is estimated across the batch and therefore need
    /// at least two samples per step.
    pub fn needs_batch_statistics(&self) -> bool {
        matches!(
            self,
            RegKind::Factor | RegKind::DipI | RegKind::DipII | RegKind::Btc
        )
    }
}

/// Hyper-parameters for every kind; only the fields relevant to `kind` are
/// consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    pub kind: RegKind,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Target KL capacity in nats (annealed kind).
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    #[serde(default = "default_anneal_steps")]
    pub anneal_steps: u64,
    #[serde(default = "default_lambda_od")]
    pub lambda_od: f64,
    #[serde(default = "default_lambda_d")]
    pub lambda_d: f64,
}

fn default_beta() -> f64 {
    4.0
}
fn default_gamma() -> f64 {
    20.0
}
fn default_c_max() -> f64 {
    25.0
}
fn default_anneal_steps() -> u64 {
    10_000
}
fn default_lambda_od() -> f64 {
    10.0
}
fn default_lambda_d() -> f64 {
    100.0
}

impl RegularizerConfig {
    /// Literature-standard defaults per kind; all overridable.
    pub fn defaults_for(kind: RegKind) -> Self {
        let mut cfg = Self {
            kind,
            beta: 4.0,
            gamma: 20.0,
            c_max: 25.0,
            anneal_steps: 10_000,
            lambda_od: 10.0,
            lambda_d: 100.0,
        };
        match kind {
            RegKind::Beta => cfg.beta = 4.0,
            RegKind::Annealed => {
                cfg.gamma = 1000.0;
                cfg.c_max = 25.0;
            }
            RegKind::Factor => cfg.gamma = 20.0,
            RegKind::DipI => {
                cfg.lambda_od = 10.0;
                cfg.lambda_d = 100.0;
            }
            RegKind::DipII => {
                cfg.lambda_od = 10.0;
                cfg.lambda_d = 10.0;
            }
            RegKind::Btc => cfg.beta = 6.0,
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("c_max", self.c_max),
            ("lambda_od", self.lambda_od),
            ("lambda_d", self.lambda_d),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "regularizer field {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.kind == RegKind::Annealed && self.anneal_steps == 0 {
            return Err(Error::Config("anneal_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    #[serde(default = "default_disc_width")]
    pub hidden_width: usize,
    #[serde(default = "default_disc_layers")]
    pub num_layers: usize,
    #[serde(default = "default_disc_lr")]
    pub learning_rate: f64,
}

fn default_disc_width() -> usize {
    256
}
fn default_disc_layers() -> usize {
    6
}
fn default_disc_lr() -> f64 {
    1e-4
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            hidden_width: default_disc_width(),
            num_layers: default_disc_layers(),
            learning_rate: default_disc_lr(),
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 2 {
            return Err(Error::Config(format!(
                "discriminator needs at least 2 layers, got {}",
                self.num_layers
            )));
        }
        if self.hidden_width == 0 {
            return Err(Error::Config("discriminator width must be positive".into()));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(
                "discriminator learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// beta-VAE: beta * KL.
pub fn beta_reg(kl: f64, beta: f64) -> f64 {
    beta * kl
}

/// Capacity schedule C(t) = c_max * min(1, t / anneal_steps).
pub fn capacity_at(step: u64, c_max: f64, anneal_steps: u64) -> Result<f64> {
    if anneal_steps == 0 {
        return Err(Error::Config("anneal_steps must be positive".into()));
    }
    Ok(c_max * (step as f64 / anneal_steps as f64).min(1.0))
}

/// AnnealedVAE: gamma * |KL - C|.
pub fn annealed_reg(kl: f64, gamma: f64, capacity: f64) -> f64 {
    gamma * (kl - capacity).abs()
}

/// Independently permutes each latent column across the batch, simulating
/// samples from the product of marginals. Per-column value multisets are
/// preserved exactly; with a single row this is the identity.
pub fn permute_dims<T: Element, R: Rng>(z: &Array2<T>, rng: &mut R) -> Array2<T> {
    let (n, d) = z.dim();
    let mut out = z.clone();
    for j in 0..d {
        // Fisher-Yates over column j
        for i in (1..n).rev() {
            let k = rng.gen_range(0..=i);
            out.swap([i, j], [k, j]);
        }
    }
    out
}

/// Density-ratio estimate of the total correlation from the discriminator's
/// two logits on joint samples: mean(logit_joint - logit_factored). May be
/// negative early in training; never clamped.
pub fn tc_estimate<T: Element>(disc_logits_real: &Array2<T>) -> f64 {
    let n = disc_logits_real.nrows() as f64;
    let mut total = 0.0;
    for row in disc_logits_real.rows() {
        total += (row[0] - row[1]).to_scalar();
    }
    total / n
}

/// FactorVAE regularization: KL + gamma * TC.
pub fn factor_vae_reg(kl: f64, gamma: f64, tc: f64) -> f64 {
    kl + gamma * tc
}

fn softplus_f64(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Two-class cross-entropy for the discriminator: class 0 = real joint
/// batch, class 1 = permuted batch; each batch contributes its mean with
/// weight 1/2.
pub fn discriminator_loss<T: Element>(logits_real: &Array2<T>, logits_perm: &Array2<T>) -> f64 {
    let mut real = 0.0;
    for row in logits_real.rows() {
        real += softplus_f64((row[1] - row[0]).to_scalar());
    }
    let mut perm = 0.0;
    for row in logits_perm.rows() {
        perm += softplus_f64((row[0] - row[1]).to_scalar());
    }
    0.5 * (real / logits_real.nrows() as f64 + perm / logits_perm.nrows() as f64)
}

/// Gradients of [`discriminator_loss`] w.r.t. both logit batches.
pub fn discriminator_loss_grads<T: Element>(
    logits_real: &Array2<T>,
    logits_perm: &Array2<T>,
) -> (Array2<T>, Array2<T>) {
    let half = T::from_scalar(0.5);
    let one = T::one();
    let nr = T::from_scalar(logits_real.nrows() as f64);
    let np = T::from_scalar(logits_perm.nrows() as f64);

    let mut g_real = Array2::zeros(logits_real.dim());
    for (i, row) in logits_real.rows().into_iter().enumerate() {
        // -ln p0: d/dl0 = -p1, d/dl1 = p1
        let p1 = one / (one + (row[0] - row[1]).exp());
        g_real[[i, 0]] = half * (-p1) / nr;
        g_real[[i, 1]] = half * p1 / nr;
    }
    let mut g_perm = Array2::zeros(logits_perm.dim());
    for (i, row) in logits_perm.rows().into_iter().enumerate() {
        // -ln p1: d/dl0 = p0, d/dl1 = -p0
        let p0 = one / (one + (row[1] - row[0]).exp());
        g_perm[[i, 0]] = half * p0 / np;
        g_perm[[i, 1]] = half * (-p0) / np;
    }
    (g_real, g_perm)
}

/// Symmetric latent covariance with non-negative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T> {
    pub cov: Array2<T>,
}

impl<T: Element> CovarianceMatrix<T> {
    pub fn new(cov: Array2<T>) -> Result<Self> {
        let (r, c) = cov.dim();
        if r != c {
            return Err(Error::Domain(format!(
                "covariance must be square, got ({r}, {c})"
            )));
        }
        for i in 0..r {
            if cov[[i, i]] < T::zero() {
                return Err(Error::Domain(
                    "covariance diagonal must be non-negative".into(),
                ));
            }
            for j in 0..i {
                if (cov[[i, j]] - cov[[j, i]]).abs().to_scalar() > 1e-9 {
                    return Err(Error::Domain("covariance must be symmetric".into()));
                }
            }
        }
        Ok(Self { cov })
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }
}

/// Population covariance E[ss^T] - E[s]E[s]^T of the rows of `samples`,
/// computed in centered form so the diagonal is exactly non-negative. The
/// same op serves both DIP variants: pass posterior means for dip_i and
/// sampled latents for dip_ii.
pub fn latent_covariance<T: Element>(samples: &Array2<T>) -> Result<CovarianceMatrix<T>> {
    let (n, d) = samples.dim();
    if n < 2 {
        return Err(Error::Domain(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let inv_n = T::from_scalar(1.0 / n as f64);
    let mean = samples.mean_axis(ndarray::Axis(0)).unwrap();
    let centered = samples - &mean;
    let mut cov = centered.t().dot(&centered) * inv_n;
    // enforce exact symmetry against GEMM rounding
    for i in 0..d {
        for j in 0..i {
            let avg = (cov[[i, j]] + cov[[j, i]]) * T::from_scalar(0.5);
            cov[[i, j]] = avg;
            cov[[j, i]] = avg;
        }
    }
    CovarianceMatrix::new(cov)
}

/// DIP penalty: lambda_od * sum_{i != j} C_ij^2 + lambda_d * sum_i (C_ii - 1)^2.
/// Zero exactly when the covariance is the identity.
pub fn dip_penalty<T: Element>(cov: &CovarianceMatrix<T>, lambda_od: f64, lambda_d: f64) -> f64 {
    let d = cov.dim();
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..d {
        for j in 0..d {
            let c = cov.cov[[i, j]].to_scalar();
            if i == j {
                diag += (c - 1.0) * (c - 1.0);
            } else {
                off += c * c;
            }
        }
    }
    lambda_od * off + lambda_d * diag
}

/// Value and gradient of the DIP penalty w.r.t. the samples that produced
/// the covariance.
pub fn dip_penalty_with_grad<T: Element>(
    samples: &Array2<T>,
    lambda_od: f64,
    lambda_d: f64,
) -> Result<(f64, Array2<T>)> {
    let cov = latent_covariance(samples)?;
    let value = dip_penalty(&cov, lambda_od, lambda_d);

    let (n, d) = samples.dim();
    let two = T::from_scalar(2.0);
    let l_od = T::from_scalar(lambda_od);
    let l_d = T::from_scalar(lambda_d);
    // G = dP/dC
    let mut g_cov = Array2::<T>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            g_cov[[i, j]] = if i == j {
                two * l_d * (cov.cov[[i, i]] - T::one())
            } else {
                two * l_od * cov.cov[[i, j]]
            };
        }
    }
    // dP/dS_b = (2/n) * G * (S_b - mean)
    let mean = samples.mean_axis(ndarray::Axis(0)).unwrap();
    let centered = samples - &mean;
    let grad = centered.dot(&g_cov) * T::from_scalar(2.0 / n as f64);
    Ok((value, grad))
}

/// Components of the minibatch-weighted total-correlation decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtcTerms {
    pub mutual_information: f64,
    pub total_correlation: f64,
    pub dimension_wise_kl: f64,
    /// mi + beta * tc + dwkl: the full regularization value.
    pub penalty: f64,
}

const LN_2PI: f64 = 1.8378770664093453;

fn log_normal(z: f64, mu: f64, logvar: f64) -> f64 {
    let diff = z - mu;
    -0.5 * (LN_2PI + logvar + diff * diff * (-logvar).exp())
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

pub type BtcGrads<T> = (Array2<T>, Array2<T>, Array2<T>);

/// Minibatch-weighted estimate of the MI / TC / dimension-wise-KL
/// decomposition, with weight `beta` on the total-correlation term only.
/// `dataset_size` is the number of distinct observations the batch was drawn
/// from. With a single latent dimension the TC term is identically zero.
pub fn btc_reg<T: Element>(
    mu: &Array2<T>,
    logvar: &Array2<T>,
    z: &Array2<T>,
    beta: f64,
    dataset_size: usize,
) -> Result<BtcTerms> {
    btc_internal(mu, logvar, z, beta, dataset_size, false).map(|(terms, _)| terms)
}

/// Like [`btc_reg`], additionally returning the penalty gradients w.r.t.
/// (mu, logvar, z).
pub fn btc_reg_with_grads<T: Element>(
    mu: &Array2<T>,
    logvar: &Array2<T>,
    z: &Array2<T>,
    beta: f64,
    dataset_size: usize,
) -> Result<(BtcTerms, BtcGrads<T>)> {
    let (terms, grads) = btc_internal(mu, logvar, z, beta, dataset_size, true)?;
    Ok((terms, grads.expect("grads requested")))
}

fn btc_internal<T: Element>(
    mu: &Array2<T>,
    logvar: &Array2<T>,
    z: &Array2<T>,
    beta: f64,
    dataset_size: usize,
    want_grads: bool,
) -> Result<(BtcTerms, Option<BtcGrads<T>>)> {
    let (n, d) = z.dim();
    if n < 2 {
        return Err(Error::Domain(format!(
            "minibatch TC estimator needs at least 2 samples, got {n}"
        )));
    }
    if mu.dim() != (n, d) || logvar.dim() != (n, d) {
        return Err(Error::Domain("mu/logvar/z shapes disagree".into()));
    }
    if dataset_size < n {
        return Err(Error::Domain(format!(
            "dataset_size {dataset_size} smaller than batch {n}"
        )));
    }

    // all internal math in f64 for stable log-sum-exp
    let zf: Vec<f64> = z.iter().map(|v| v.to_scalar()).collect();
    let mf: Vec<f64> = mu.iter().map(|v| v.to_scalar()).collect();
    let lf: Vec<f64> = logvar.iter().map(|v| v.to_scalar()).collect();

    // mat[i][j][k] = log N(z_ik ; mu_jk, var_jk)
    let mut mat = vec![0.0f64; n * n * d];
    for i in 0..n {
        for j in 0..n {
            for k in 0..d {
                mat[(i * n + j) * d + k] = log_normal(zf[i * d + k], mf[j * d + k], lf[j * d + k]);
            }
        }
    }
    let log_nm = ((n * dataset_size) as f64).ln();

    let mut log_q_cond = vec![0.0f64; n];
    let mut log_pz = vec![0.0f64; n];
    let mut log_qz = vec![0.0f64; n];
    let mut log_qz_prod = vec![0.0f64; n];
    let mut row_joint = vec![0.0f64; n]; // scratch per i

    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..d {
                s += mat[(i * n + j) * d + k];
            }
            row_joint[j] = s;
        }
        log_q_cond[i] = row_joint[i];
        log_qz[i] = logsumexp(&row_joint) - log_nm;
        let mut prod = 0.0;
        for k in 0..d {
            let col: Vec<f64> = (0..n).map(|j| mat[(i * n + j) * d + k]).collect();
            prod += logsumexp(&col) - log_nm;
        }
        log_qz_prod[i] = prod;
        let mut pz = 0.0;
        for k in 0..d {
            let v = zf[i * d + k];
            pz += -0.5 * (LN_2PI + v * v);
        }
        log_pz[i] = pz;
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / n as f64;
    let mi = mean(&log_q_cond) - mean(&log_qz);
    let tc = mean(&log_qz) - mean(&log_qz_prod);
    let dwkl = mean(&log_qz_prod) - mean(&log_pz);
    let terms = BtcTerms {
        mutual_information: mi,
        total_correlation: tc,
        dimension_wise_kl: dwkl,
        penalty: mi + beta * tc + dwkl,
    };
    if !want_grads {
        return Ok((terms, None));
    }

    // penalty = mean_i [ a_ii + (beta-1) lse_j(a_ij) - (beta-1) sum_k lse_j(m_ijk) - log p(z_i) ]
    // plus constants; the coefficient on d(m_ijk) is
    //   (1/n) [ 1{j=i} + (beta-1) w_ij - (beta-1) u_ijk ]
    // with w, u the softmax weights of the two log-sum-exps.
    let inv_n = 1.0 / n as f64;
    let bm1 = beta - 1.0;
    let mut g_z = vec![0.0f64; n * d];
    let mut g_mu = vec![0.0f64; n * d];
    let mut g_lv = vec![0.0f64; n * d];

    let mut w = vec![0.0f64; n];
    let mut u = vec![0.0f64; n * d];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..d {
                s += mat[(i * n + j) * d + k];
            }
            row_joint[j] = s;
        }
        let lse_joint = logsumexp(&row_joint);
        for j in 0..n {
            w[j] = (row_joint[j] - lse_joint).exp();
        }
        for k in 0..d {
            let col: Vec<f64> = (0..n).map(|j| mat[(i * n + j) * d + k]).collect();
            let lse = logsumexp(&col);
            for j in 0..n {
                u[j * d + k] = (col[j] - lse).exp();
            }
        }
        for j in 0..n {
            for k in 0..d {
                let coeff =
                    inv_n * (if i == j { 1.0 } else { 0.0 } + bm1 * w[j] - bm1 * u[j * d + k]);
                if coeff == 0.0 {
                    continue;
                }
                let zv = zf[i * d + k];
                let muv = mf[j * d + k];
                let inv_var = (-lf[j * d + k]).exp();
                let diff = (zv - muv) * inv_var;
                // d m_ijk / d z_ik = -diff ; / d mu_jk = diff
                // d m_ijk / d lv_jk = -0.5 + 0.5 (z - mu)^2 / var
                g_z[i * d + k] -= coeff * diff;
                g_mu[j * d + k] += coeff * diff;
                g_lv[j * d + k] += coeff * (-0.5 + 0.5 * (zv - muv) * diff);
            }
        }
        // -log p(z_i) contributes +z/n
        for k in 0..d {
            g_z[i * d + k] += inv_n * zf[i * d + k];
        }
    }

    let to_arr = |v: Vec<f64>| {
        Array2::from_shape_vec((n, d), v.into_iter().map(T::from_scalar).collect()).unwrap()
    };
    Ok((terms, Some((to_arr(g_mu), to_arr(g_lv), to_arr(g_z)))))
}

pub struct DiscriminatorCache<T> {
    inputs: Vec<Array2<T>>,
    pre_acts: Vec<Array2<T>>,
}

/// MLP scoring latent batches with two logits: index 0 = "real joint",
/// index 1 = "permuted".
#[derive(Debug, Clone)]
pub struct Discriminator<T> {
    pub hidden: Vec<Linear<T>>,
    pub head: Linear<T>,
    slope: T,
}

impl<T: Element> Discriminator<T> {
    pub fn init<R: Rng>(latent_dim: usize, cfg: &DiscriminatorConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut hidden = Vec::with_capacity(cfg.num_layers);
        let mut in_dim = latent_dim;
        for _ in 0..cfg.num_layers {
            hidden.push(Linear::init(cfg.hidden_width, in_dim, rng));
            in_dim = cfg.hidden_width;
        }
        let head = Linear::init(2, in_dim, rng);
        Ok(Self {
            hidden,
            head,
            slope: T::from_scalar(0.2),
        })
    }

    pub fn forward(&self, z: &Array2<T>) -> (Array2<T>, DiscriminatorCache<T>) {
        let mut inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut pre_acts = Vec::with_capacity(self.hidden.len());
        let mut cur = z.clone();
        for layer in &self.hidden {
            let pre = layer.forward(&cur);
            inputs.push(cur);
            cur = leaky_relu(&pre, self.slope);
            pre_acts.push(pre);
        }
        let logits = self.head.forward(&cur);
        inputs.push(cur);
        (logits, DiscriminatorCache { inputs, pre_acts })
    }

    /// Accumulates parameter gradients; returns the input gradient.
    pub fn backward(&mut self, cache: &DiscriminatorCache<T>, g_logits: &Array2<T>) -> Array2<T> {
        let mut g = self.head.backward(cache.inputs.last().unwrap(), g_logits);
        for i in (0..self.hidden.len()).rev() {
            let g_pre = leaky_relu_backward(&cache.pre_acts[i], &g, self.slope);
            g = self.hidden[i].backward(&cache.inputs[i], &g_pre);
        }
        g
    }

    /// Input gradient only; discriminator parameters stay untouched. Used
    /// when the TC term backpropagates into the latents.
    pub fn backward_data(&self, cache: &DiscriminatorCache<T>, g_logits: &Array2<T>) -> Array2<T> {
        let mut g = self.head.backward_data(g_logits);
        for i in (0..self.hidden.len()).rev() {
            let g_pre = leaky_relu_backward(&cache.pre_acts[i], &g, self.slope);
            g = self.hidden[i].backward_data(&g_pre);
        }
        g
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.hidden {
            l.zero_grad();
        }
        self.head.zero_grad();
    }

    pub fn entries(&mut self) -> Vec<crate::nn::TensorEntry<'_, T>> {
        let mut out = Vec::new();
        for (i, l) in self.hidden.iter_mut().enumerate() {
            out.extend(l.entries(&format!("disc.h{i}")));
        }
        out.extend(self.head.entries("disc.head"));
        out
    }

    pub fn views(&self) -> Vec<crate::nn::TensorView<'_, T>> {
        let mut out = Vec::new();
        for (i, l) in self.hidden.iter().enumerate() {
            out.extend(l.views(&format!("disc.h{i}")));
        }
        out.extend(self.head.views("disc.head"));
        out
    }
}

/// KL gradient scale factor for the kinds whose regularizer is a scaled KL:
/// beta -> beta, annealed -> gamma * sign(kl - C), factor/dip -> 1, and 0
/// for btc, which replaces the KL term entirely.
pub fn kl_weight(cfg: &RegularizerConfig, kl: f64, capacity: f64) -> f64 {
    match cfg.kind {
        RegKind::Beta => cfg.beta,
        RegKind::Annealed => {
            if kl >= capacity {
                cfg.gamma
            } else {
                -cfg.gamma
            }
        }
        RegKind::Factor | RegKind::DipI | RegKind::DipII => 1.0,
        RegKind::Btc => 0.0,
    }
}
