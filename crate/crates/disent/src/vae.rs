//! Convolutional encoder/decoder, reparameterization, and the two terms of
//! the variational bound: Bernoulli reconstruction loss and KL to the
//! standard-normal prior.
//!
//! Losses are reduced by summing over pixels/latent dimensions and averaging
//! over the batch, which keeps the regularizer weights on the scales the
//! literature reports. The prior is always N(0, I).

use ndarray::{Array2, Array4, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Observation;
use crate::error::{Error, Result};
use crate::nn::{leaky_relu, leaky_relu_backward, Conv2d, ConvTranspose2d, Element, Linear};

pub const CONV_KERNEL: usize = 4;
pub const CONV_STRIDE: usize = 2;
pub const CONV_PAD: usize = 1;
/// Spatial size at the bottom of the conv stack.
pub const BASE_SPATIAL: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    /// Negative-side slope of the Leaky ReLU used everywhere.
    #[serde(default = "default_slope")]
    pub activation_slope: f64,
    /// Channel counts of the strided conv stages; the first `log2(size/4)`
    /// entries are used for a given image size.
    #[serde(default = "default_conv_widths")]
    pub conv_widths: Vec<usize>,
    #[serde(default = "default_fc_width")]
    pub fc_width: usize,
}

fn default_latent_dim() -> usize {
    10
}
fn default_slope() -> f64 {
    0.2
}
fn default_conv_widths() -> Vec<usize> {
    vec![32, 32, 64, 64]
}
fn default_fc_width() -> usize {
    256
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: default_latent_dim(),
            activation_slope: default_slope(),
            conv_widths: default_conv_widths(),
            fc_width: default_fc_width(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim < 2 {
            return Err(Error::Config(format!(
                "latent_dim must be >= 2, got {}",
                self.latent_dim
            )));
        }
        if !(self.activation_slope > 0.0 && self.activation_slope < 1.0) {
            return Err(Error::Config(format!(
                "activation_slope must lie in (0, 1), got {}",
                self.activation_slope
            )));
        }
        if self.fc_width == 0 {
            return Err(Error::Config("fc_width must be positive".into()));
        }
        if self.conv_widths.contains(&0) {
            return Err(Error::Config("conv widths must be positive".into()));
        }
        Ok(())
    }

    /// Number of stride-2 conv stages needed to bring `image_size` down to
    /// the 4x4 base grid.
    pub fn num_stages(&self, image_size: usize) -> Result<usize> {
        let mut s = image_size;
        let mut stages = 0;
        while s > BASE_SPATIAL {
            if !s.is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "image size {image_size} is not 4 * 2^k"
                )));
            }
            s /= 2;
            stages += 1;
        }
        if s != BASE_SPATIAL {
            return Err(Error::Config(format!(
                "image size {image_size} is below the {BASE_SPATIAL}x{BASE_SPATIAL} base grid"
            )));
        }
        if self.conv_widths.len() < stages {
            return Err(Error::Config(format!(
                "need {stages} conv widths for image size {image_size}, got {}",
                self.conv_widths.len()
            )));
        }
        Ok(stages)
    }
}

/// Posterior parameters for a batch: per-sample mean and log-variance.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput<T> {
    pub mu: Array2<T>,
    pub logvar: Array2<T>,
}

/// Reparameterized latent samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch<T> {
    pub z: Array2<T>,
}

/// Stacks observations into an (n, 1, h, w) tensor.
pub fn batch_to_array<T: Element>(obs: &[Observation]) -> Array4<T> {
    assert!(!obs.is_empty(), "empty observation batch");
    let (h, w) = (obs[0].height, obs[0].width);
    let mut x = Array4::zeros((obs.len(), 1, h, w));
    for (i, o) in obs.iter().enumerate() {
        debug_assert_eq!(o.pixels.len(), h * w);
        for (j, &p) in o.pixels.iter().enumerate() {
            x[[i, 0, j / w, j % w]] = T::from_scalar(p as f64);
        }
    }
    x
}

pub struct EncoderCache<T> {
    conv_in: Vec<Array4<T>>,
    conv_pre: Vec<Array4<T>>,
    flat: Array2<T>,
    fc_pre: Array2<T>,
    fc_act: Array2<T>,
}

/// Conv stack -> FC -> (mu, logvar) heads.
#[derive(Debug, Clone)]
pub struct Encoder<T> {
    pub convs: Vec<Conv2d<T>>,
    pub fc: Linear<T>,
    pub mu_head: Linear<T>,
    pub logvar_head: Linear<T>,
    slope: T,
    image_size: usize,
    latent_dim: usize,
}

impl<T: Element> Encoder<T> {
    pub fn init<R: Rng>(cfg: &ModelConfig, image_size: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let stages = cfg.num_stages(image_size)?;
        let mut convs = Vec::with_capacity(stages);
        let mut in_c = 1;
        for &out_c in cfg.conv_widths.iter().take(stages) {
            convs.push(Conv2d::init(out_c, in_c, CONV_KERNEL, CONV_STRIDE, CONV_PAD, rng));
            in_c = out_c;
        }
        let flat_dim = in_c * BASE_SPATIAL * BASE_SPATIAL;
        let fc = Linear::init(cfg.fc_width, flat_dim, rng);
        let mu_head = Linear::init(cfg.latent_dim, cfg.fc_width, rng);
        let logvar_head = Linear::init(cfg.latent_dim, cfg.fc_width, rng);
        Ok(Self {
            convs,
            fc,
            mu_head,
            logvar_head,
            slope: T::from_scalar(cfg.activation_slope),
            image_size,
            latent_dim: cfg.latent_dim,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    /// q(z|x): deterministic map from images to posterior parameters.
    pub fn forward(&self, x: &Array4<T>) -> Result<(EncoderOutput<T>, EncoderCache<T>)> {
        let (n, c, h, w) = x.dim();
        if n == 0 {
            return Err(Error::Domain("empty batch".into()));
        }
        if c != 1 || h != self.image_size || w != self.image_size {
            return Err(Error::Domain(format!(
                "expected batch of (1, {s}, {s}) images, got ({c}, {h}, {w})",
                s = self.image_size
            )));
        }
        let mut conv_in = Vec::with_capacity(self.convs.len());
        let mut conv_pre = Vec::with_capacity(self.convs.len());
        let mut cur = x.clone();
        for conv in &self.convs {
            let pre = conv.forward(&cur);
            conv_in.push(cur);
            cur = leaky_relu(&pre, self.slope);
            conv_pre.push(pre);
        }
        let flat_dim = cur.len() / n;
        let flat = cur.into_shape_with_order((n, flat_dim)).unwrap();
        let fc_pre = self.fc.forward(&flat);
        let fc_act = leaky_relu(&fc_pre, self.slope);
        let mu = self.mu_head.forward(&fc_act);
        let logvar = self.logvar_head.forward(&fc_act);
        Ok((
            EncoderOutput { mu, logvar },
            EncoderCache {
                conv_in,
                conv_pre,
                flat,
                fc_pre,
                fc_act,
            },
        ))
    }

    /// Backprop from head gradients; accumulates into the layer grads.
    pub fn backward(&mut self, cache: &EncoderCache<T>, g_mu: &Array2<T>, g_logvar: &Array2<T>) {
        let g_fc_act = self.mu_head.backward(&cache.fc_act, g_mu)
            + self.logvar_head.backward(&cache.fc_act, g_logvar);
        let g_fc_pre = leaky_relu_backward(&cache.fc_pre, &g_fc_act, self.slope);
        let g_flat = self.fc.backward(&cache.flat, &g_fc_pre);

        if self.convs.is_empty() {
            return;
        }
        let last_pre = &cache.conv_pre[self.convs.len() - 1];
        let mut g_cur = {
            let g4 = g_flat.into_shape_with_order(last_pre.dim()).unwrap();
            leaky_relu_backward(last_pre, &g4, self.slope)
        };
        for i in (0..self.convs.len()).rev() {
            let g_in = self.convs[i].backward(&cache.conv_in[i], &g_cur);
            if i > 0 {
                g_cur = leaky_relu_backward(&cache.conv_pre[i - 1], &g_in, self.slope);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for c in &mut self.convs {
            c.zero_grad();
        }
        self.fc.zero_grad();
        self.mu_head.zero_grad();
        self.logvar_head.zero_grad();
    }

    pub fn entries(&mut self) -> Vec<crate::nn::TensorEntry<'_, T>> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter_mut().enumerate() {
            out.extend(c.entries(&format!("encoder.conv{i}")));
        }
        out.extend(self.fc.entries("encoder.fc"));
        out.extend(self.mu_head.entries("encoder.mu"));
        out.extend(self.logvar_head.entries("encoder.logvar"));
        out
    }

    pub fn views(&self) -> Vec<crate::nn::TensorView<'_, T>> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.extend(c.views(&format!("encoder.conv{i}")));
        }
        out.extend(self.fc.views("encoder.fc"));
        out.extend(self.mu_head.views("encoder.mu"));
        out.extend(self.logvar_head.views("encoder.logvar"));
        out
    }
}

pub struct DecoderCache<T> {
    z: Array2<T>,
    fc1_pre: Array2<T>,
    fc1_act: Array2<T>,
    fc2_pre: Array2<T>,
    deconv_in: Vec<Array4<T>>,
    deconv_pre: Vec<Array4<T>>,
}

/// FC -> reshape to the 4x4 base grid -> transposed conv stack -> logits.
#[derive(Debug, Clone)]
pub struct Decoder<T> {
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
    pub deconvs: Vec<ConvTranspose2d<T>>,
    slope: T,
    image_size: usize,
    latent_dim: usize,
    base_channels: usize,
}

impl<T: Element> Decoder<T> {
    pub fn init<R: Rng>(cfg: &ModelConfig, image_size: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let stages = cfg.num_stages(image_size)?;
        // mirror of the encoder channel sequence
        let widths: Vec<usize> = cfg.conv_widths.iter().take(stages).rev().copied().collect();
        let base_channels = *widths.first().unwrap_or(&1);
        let fc1 = Linear::init(cfg.fc_width, cfg.latent_dim, rng);
        let fc2 = Linear::init(base_channels * BASE_SPATIAL * BASE_SPATIAL, cfg.fc_width, rng);
        let mut deconvs = Vec::with_capacity(stages);
        for i in 0..stages {
            let in_c = widths[i];
            let out_c = if i + 1 < stages { widths[i + 1] } else { 1 };
            deconvs.push(ConvTranspose2d::init(
                in_c, out_c, CONV_KERNEL, CONV_STRIDE, CONV_PAD, rng,
            ));
        }
        Ok(Self {
            fc1,
            fc2,
            deconvs,
            slope: T::from_scalar(cfg.activation_slope),
            image_size,
            latent_dim: cfg.latent_dim,
            base_channels,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    /// p(x|z): per-pixel Bernoulli logits of shape (n, 1, h, w).
    pub fn forward(&self, z: &Array2<T>) -> Result<(Array4<T>, DecoderCache<T>)> {
        let (n, d) = z.dim();
        if d != self.latent_dim {
            return Err(Error::Domain(format!(
                "latent width {d} does not match decoder width {}",
                self.latent_dim
            )));
        }
        let fc1_pre = self.fc1.forward(z);
        let fc1_act = leaky_relu(&fc1_pre, self.slope);
        let fc2_pre = self.fc2.forward(&fc1_act);

        let base = (n, self.base_channels, BASE_SPATIAL, BASE_SPATIAL);
        if self.deconvs.is_empty() {
            // degenerate 4x4 geometry: the second FC already produces logits
            let logits = fc2_pre.clone().into_shape_with_order(base).unwrap();
            return Ok((
                logits,
                DecoderCache {
                    z: z.clone(),
                    fc1_pre,
                    fc1_act,
                    fc2_pre,
                    deconv_in: Vec::new(),
                    deconv_pre: Vec::new(),
                },
            ));
        }

        let mut cur = leaky_relu(&fc2_pre, self.slope)
            .into_shape_with_order(base)
            .unwrap();
        let mut deconv_in = Vec::with_capacity(self.deconvs.len());
        let mut deconv_pre = Vec::with_capacity(self.deconvs.len());
        for (i, deconv) in self.deconvs.iter().enumerate() {
            let pre = deconv.forward(&cur);
            deconv_in.push(cur);
            cur = if i + 1 < self.deconvs.len() {
                leaky_relu(&pre, self.slope)
            } else {
                pre.clone() // final stage emits raw logits
            };
            deconv_pre.push(pre);
        }
        Ok((
            cur,
            DecoderCache {
                z: z.clone(),
                fc1_pre,
                fc1_act,
                fc2_pre,
                deconv_in,
                deconv_pre,
            },
        ))
    }

    /// Backprop from the logits gradient; returns the gradient w.r.t. z.
    pub fn backward(&mut self, cache: &DecoderCache<T>, g_logits: &Array4<T>) -> Array2<T> {
        let n = g_logits.dim().0;
        let g_fc2_pre = if self.deconvs.is_empty() {
            g_logits
                .clone()
                .into_shape_with_order((n, self.fc2.out_dim()))
                .unwrap()
        } else {
            let mut g_cur = g_logits.clone();
            for i in (0..self.deconvs.len()).rev() {
                let g_in = self.deconvs[i].backward(&cache.deconv_in[i], &g_cur);
                if i > 0 {
                    g_cur = leaky_relu_backward(&cache.deconv_pre[i - 1], &g_in, self.slope);
                } else {
                    g_cur = g_in;
                }
            }
            let g_flat = g_cur.into_shape_with_order((n, self.fc2.out_dim())).unwrap();
            leaky_relu_backward(&cache.fc2_pre, &g_flat, self.slope)
        };
        let g_fc1_act = self.fc2.backward(&cache.fc1_act, &g_fc2_pre);
        let g_fc1_pre = leaky_relu_backward(&cache.fc1_pre, &g_fc1_act, self.slope);
        self.fc1.backward(&cache.z, &g_fc1_pre)
    }

    pub fn zero_grad(&mut self) {
        self.fc1.zero_grad();
        self.fc2.zero_grad();
        for d in &mut self.deconvs {
            d.zero_grad();
        }
    }

    pub fn entries(&mut self) -> Vec<crate::nn::TensorEntry<'_, T>> {
        let mut out = Vec::new();
        out.extend(self.fc1.entries("decoder.fc1"));
        out.extend(self.fc2.entries("decoder.fc2"));
        for (i, d) in self.deconvs.iter_mut().enumerate() {
            out.extend(d.entries(&format!("decoder.deconv{i}")));
        }
        out
    }

    pub fn views(&self) -> Vec<crate::nn::TensorView<'_, T>> {
        let mut out = Vec::new();
        out.extend(self.fc1.views("decoder.fc1"));
        out.extend(self.fc2.views("decoder.fc2"));
        for (i, d) in self.deconvs.iter().enumerate() {
            out.extend(d.views(&format!("decoder.deconv{i}")));
        }
        out
    }
}

/// z = mu + exp(logvar/2) * eps, elementwise.
pub fn reparameterize<T: Element>(enc: &EncoderOutput<T>, eps: &Array2<T>) -> LatentBatch<T> {
    debug_assert_eq!(enc.mu.dim(), eps.dim());
    let half = T::from_scalar(0.5);
    let mut z = enc.mu.clone();
    Zip::from(&mut z).and(&enc.logvar).and(eps).for_each(|z, &lv, &e| {
        *z += (lv * half).exp() * e;
    });
    LatentBatch { z }
}

/// Pushes a gradient w.r.t. z back onto (mu, logvar) for the eps actually used.
pub fn reparameterize_backward<T: Element>(
    enc: &EncoderOutput<T>,
    eps: &Array2<T>,
    g_z: &Array2<T>,
) -> (Array2<T>, Array2<T>) {
    let half = T::from_scalar(0.5);
    let g_mu = g_z.clone();
    let mut g_lv = g_z.clone();
    Zip::from(&mut g_lv).and(&enc.logvar).and(eps).for_each(|g, &lv, &e| {
        *g = *g * e * half * (lv * half).exp();
    });
    (g_mu, g_lv)
}

fn softplus<T: Element>(x: T) -> T {
    // max(x, 0) + ln(1 + exp(-|x|))
    let mag = (-x.abs()).exp();
    x.max(T::zero()) + mag.ln_1p()
}

/// Negative Bernoulli log-likelihood of `x` under per-pixel logits, summed
/// over pixels and averaged over the batch.
pub fn reconstruction_loss<T: Element>(logits: &Array4<T>, x: &Array4<T>) -> Result<f64> {
    if logits.dim() != x.dim() {
        return Err(Error::Domain(format!(
            "logits shape {:?} does not match targets {:?}",
            logits.dim(),
            x.dim()
        )));
    }
    let one = T::one();
    if x.iter().any(|&v| v < T::zero() || v > one) {
        return Err(Error::Domain("target pixels must lie in [0, 1]".into()));
    }
    let n = x.dim().0 as f64;
    let mut total = 0.0;
    Zip::from(logits).and(x).for_each(|&l, &t| {
        total += (softplus(l) - l * t).to_scalar();
    });
    Ok(total / n)
}

/// d(reconstruction_loss)/d(logits) = (sigmoid(logits) - x) / n.
pub fn reconstruction_loss_grad<T: Element>(logits: &Array4<T>, x: &Array4<T>) -> Array4<T> {
    let n = T::from_scalar(x.dim().0 as f64);
    let one = T::one();
    let mut g = logits.clone();
    Zip::from(&mut g).and(x).for_each(|g, &t| {
        let sig = one / (one + (-*g).exp());
        *g = (sig - t) / n;
    });
    g
}

/// KL(q(z|x) || N(0, I)) in closed form, summed over dimensions and averaged
/// over the batch: 0.5 * sum(mu^2 + sigma^2 - 1 - log sigma^2).
pub fn kl_to_prior<T: Element>(enc: &EncoderOutput<T>) -> f64 {
    let n = enc.mu.dim().0 as f64;
    let mut total = 0.0;
    Zip::from(&enc.mu).and(&enc.logvar).for_each(|&m, &lv| {
        total += 0.5 * (m * m + lv.exp() - T::one() - lv).to_scalar();
    });
    total / n
}

/// Gradients of [`kl_to_prior`] w.r.t. (mu, logvar).
pub fn kl_to_prior_grads<T: Element>(enc: &EncoderOutput<T>) -> (Array2<T>, Array2<T>) {
    let n = T::from_scalar(enc.mu.dim().0 as f64);
    let half = T::from_scalar(0.5);
    let g_mu = enc.mu.mapv(|m| m / n);
    let g_lv = enc.logvar.mapv(|lv| half * (lv.exp() - T::one()) / n);
    (g_mu, g_lv)
}

/// Total loss of the plain bound in minimization form.
pub fn elbo_loss(recon: f64, kl: f64) -> f64 {
    recon + kl
}
