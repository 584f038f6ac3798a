//! Seeded training loop with alternating discriminator updates for the
//! factor kind, loss traces, and exact-resume checkpoints.
//!
//! Determinism contract: every random draw comes from one of several
//! purpose-bound ChaCha streams derived from the run seed (model init,
//! discriminator init, batch sampling, reparameterization noise, the
//! discriminator's batches and noise, and column permutations). Because the
//! streams are independent, a FactorVAE run with `gamma = 0` consumes
//! exactly the same draws on the VAE path as a plain run, and the reduction
//! equivalences hold bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{FactorTuple, GroundTruthDataset};
use crate::error::{Error, Result};
use crate::metrics::{Representation, RepresentationMatrix};
use crate::nn::{fill_normal, AdamConfig, AdamState};
use crate::regularizers::{
    annealed_reg, beta_reg, btc_reg_with_grads, capacity_at, dip_penalty_with_grad,
    discriminator_loss, discriminator_loss_grads, factor_vae_reg, kl_weight, permute_dims,
    tc_estimate, Discriminator, DiscriminatorConfig, RegKind, RegularizerConfig,
};
use crate::vae::{
    batch_to_array, kl_to_prior, kl_to_prior_grads, reconstruction_loss, reconstruction_loss_grad,
    reparameterize, reparameterize_backward, Decoder, Encoder, ModelConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_disc_beta1")]
    pub disc_beta1: f64,
    #[serde(default = "default_disc_beta2")]
    pub disc_beta2: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_regularizer")]
    pub regularizer: RegularizerConfig,
    #[serde(default)]
    pub discriminator: DiscriminatorConfig,
}

fn default_steps() -> u64 {
    20_000
}
fn default_batch_size() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_disc_beta1() -> f64 {
    0.5
}
fn default_disc_beta2() -> f64 {
    0.9
}
fn default_regularizer() -> RegularizerConfig {
    RegularizerConfig::defaults_for(RegKind::Factor)
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            batch_size: default_batch_size(),
            learning_rate: default_lr(),
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            disc_beta1: default_disc_beta1(),
            disc_beta2: default_disc_beta2(),
            seed: 0,
            model: ModelConfig::default(),
            regularizer: default_regularizer(),
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.regularizer.kind.needs_batch_statistics() && self.batch_size < 2 {
            return Err(Error::Config(format!(
                "regularizer kind '{}' needs batch_size >= 2",
                self.regularizer.kind.as_str()
            )));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        self.model.validate()?;
        self.regularizer.validate()?;
        self.discriminator.validate()?;
        Ok(())
    }
}

/// One logged training step. `aux` carries the kind-specific diagnostic:
/// the TC estimate (factor), the estimator's TC term (btc), the covariance
/// penalty (dip), or the current capacity (annealed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub recon: f64,
    pub kl: f64,
    pub reg_total: f64,
    pub aux: f64,
    pub disc_loss: Option<f64>,
}

impl StepRecord {
    /// Total minimized loss at this step.
    pub fn total(&self) -> f64 {
        self.recon + self.reg_total
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub records: Vec<StepRecord>,
}

impl LossTrace {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "recon", "kl", "reg", "tc", "disc_loss"])?;
        for r in &self.records {
            w.write_record(&[
                r.step.to_string(),
                format!("{:.16e}", r.recon),
                format!("{:.16e}", r.kl),
                format!("{:.16e}", r.reg_total),
                format!("{:.16e}", r.aux),
                r.disc_loss.map(|d| format!("{d:.16e}")).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// RNG stream ids; each consumer owns one stream of the seeded ChaCha key.
mod streams {
    pub const MODEL_INIT: u64 = 0;
    pub const DISC_INIT: u64 = 1;
    pub const DATA: u64 = 2;
    pub const EPS: u64 = 3;
    pub const DISC_DATA: u64 = 4;
    pub const DISC_EPS: u64 = 5;
    pub const PERMUTE: u64 = 6;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Complete, serializable state of one training run.
pub struct RunState {
    pub config: TrainConfig,
    pub step: u64,
    pub encoder: Encoder<f32>,
    pub decoder: Decoder<f32>,
    pub discriminator: Option<Discriminator<f32>>,
    pub adam_vae: AdamState<f32>,
    pub adam_disc: Option<AdamState<f32>>,
    data_rng: ChaCha8Rng,
    eps_rng: ChaCha8Rng,
    disc_data_rng: ChaCha8Rng,
    disc_eps_rng: ChaCha8Rng,
    permute_rng: ChaCha8Rng,
}

/// Validates the config and builds step-0 state: freshly initialized
/// networks, empty optimizer moments, and rng streams at their origins.
pub fn init_run(dataset: &GroundTruthDataset, config: &TrainConfig) -> Result<RunState> {
    config.validate()?;
    let image_size = dataset.image_size();
    let mut init_rng = stream_rng(config.seed, streams::MODEL_INIT);
    let encoder = Encoder::init(&config.model, image_size, &mut init_rng)?;
    let decoder = Decoder::init(&config.model, image_size, &mut init_rng)?;
    let discriminator = if config.regularizer.kind == RegKind::Factor {
        let mut disc_rng = stream_rng(config.seed, streams::DISC_INIT);
        Some(Discriminator::init(
            config.model.latent_dim,
            &config.discriminator,
            &mut disc_rng,
        )?)
    } else {
        None
    };
    let adam_vae = AdamState::new(AdamConfig::new(
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
    ));
    let adam_disc = discriminator.as_ref().map(|_| {
        AdamState::new(AdamConfig::new(
            config.discriminator.learning_rate,
            config.disc_beta1,
            config.disc_beta2,
        ))
    });
    Ok(RunState {
        config: config.clone(),
        step: 0,
        encoder,
        decoder,
        discriminator,
        adam_vae,
        adam_disc,
        data_rng: stream_rng(config.seed, streams::DATA),
        eps_rng: stream_rng(config.seed, streams::EPS),
        disc_data_rng: stream_rng(config.seed, streams::DISC_DATA),
        disc_eps_rng: stream_rng(config.seed, streams::DISC_EPS),
        permute_rng: stream_rng(config.seed, streams::PERMUTE),
    })
}

fn check_finite(step: u64, parts: &[(&str, f64)]) -> Result<()> {
    if parts.iter().all(|(_, v)| v.is_finite()) {
        return Ok(());
    }
    let detail = parts
        .iter()
        .map(|(name, v)| format!("{name}={v}"))
        .collect::<Vec<_>>()
        .join(", ");
    Err(Error::NonFinite { step, detail })
}

/// One gradient step for the non-adversarial kinds (beta, annealed, dip_i,
/// dip_ii, btc). The factor kind goes through [`factorvae_step`].
pub fn vae_step(
    state: &mut RunState,
    dataset: &GroundTruthDataset,
    batch: &Array4<f32>,
) -> Result<StepRecord> {
    let record = vae_update(state, dataset, batch)?;
    state.step += 1;
    Ok(record)
}

/// Alternating FactorVAE update: step A trains the VAE on
/// recon + KL + gamma * TC through the frozen discriminator; step B trains
/// the discriminator to separate `vae`-style latents of a second batch from
/// their column-permuted copies. Both parameter sets move exactly once.
pub fn factorvae_step(
    state: &mut RunState,
    dataset: &GroundTruthDataset,
    vae_batch: &Array4<f32>,
    disc_batch: &Array4<f32>,
) -> Result<StepRecord> {
    if vae_batch.dim().0 < 2 || disc_batch.dim().0 < 2 {
        return Err(Error::Config(
            "factorvae_step needs batches of at least 2 samples".into(),
        ));
    }
    let mut record = vae_update(state, dataset, vae_batch)?;

    // step B: discriminator update on an independent batch
    let disc = state
        .discriminator
        .as_mut()
        .expect("factor kind always carries a discriminator");
    let (enc_out, _) = state.encoder.forward(disc_batch)?;
    let n = disc_batch.dim().0;
    let d = state.config.model.latent_dim;
    let mut eps = Array2::<f32>::zeros((n, d));
    fill_normal(&mut eps, 1.0, &mut state.disc_eps_rng);
    let z = reparameterize(&enc_out, &eps).z;
    let z_perm = permute_dims(&z, &mut state.permute_rng);

    let (logits_real, cache_real) = disc.forward(&z);
    let (logits_perm, cache_perm) = disc.forward(&z_perm);
    let loss = discriminator_loss(&logits_real, &logits_perm);
    check_finite(state.step + 1, &[("disc_loss", loss)])?;
    let (g_real, g_perm) = discriminator_loss_grads(&logits_real, &logits_perm);
    disc.zero_grad();
    disc.backward(&cache_real, &g_real);
    disc.backward(&cache_perm, &g_perm);
    let adam = state.adam_disc.as_mut().expect("factor kind has disc adam");
    adam.begin_step();
    for entry in disc.entries() {
        adam.update(entry.param, entry.grad);
    }

    record.disc_loss = Some(loss);
    state.step += 1;
    Ok(record)
}

/// The shared VAE-side update (step A). Does not advance the step counter.
fn vae_update(
    state: &mut RunState,
    dataset: &GroundTruthDataset,
    batch: &Array4<f32>,
) -> Result<StepRecord> {
    let reg = state.config.regularizer.clone();
    let step_no = state.step + 1;
    let n = batch.dim().0;
    let d = state.config.model.latent_dim;

    state.encoder.zero_grad();
    state.decoder.zero_grad();

    let (enc_out, enc_cache) = state.encoder.forward(batch)?;
    let mut eps = Array2::<f32>::zeros((n, d));
    fill_normal(&mut eps, 1.0, &mut state.eps_rng);
    let z = reparameterize(&enc_out, &eps).z;
    let (logits, dec_cache) = state.decoder.forward(&z)?;

    let recon = reconstruction_loss(&logits, batch)?;
    let kl = kl_to_prior(&enc_out);

    let g_logits = reconstruction_loss_grad(&logits, batch);
    let mut g_z = state.decoder.backward(&dec_cache, &g_logits);

    let mut g_mu_extra: Option<Array2<f32>> = None;
    let mut g_lv_extra: Option<Array2<f32>> = None;
    let capacity = if reg.kind == RegKind::Annealed {
        capacity_at(state.step, reg.c_max, reg.anneal_steps)?
    } else {
        0.0
    };

    let (reg_total, aux) = match reg.kind {
        RegKind::Beta => (beta_reg(kl, reg.beta), 0.0),
        RegKind::Annealed => (annealed_reg(kl, reg.gamma, capacity), capacity),
        RegKind::Factor => {
            let disc = state
                .discriminator
                .as_ref()
                .expect("factor kind always carries a discriminator");
            let (disc_logits, disc_cache) = disc.forward(&z);
            let tc = tc_estimate(&disc_logits);
            // d tc / d logits = (1/n, -1/n) per row, scaled by gamma
            let gamma = reg.gamma as f32;
            let inv_n = 1.0f32 / n as f32;
            let mut g_disc_logits = Array2::<f32>::zeros(disc_logits.dim());
            for i in 0..n {
                g_disc_logits[[i, 0]] = gamma * inv_n;
                g_disc_logits[[i, 1]] = -gamma * inv_n;
            }
            g_z += &disc.backward_data(&disc_cache, &g_disc_logits);
            (factor_vae_reg(kl, reg.gamma, tc), tc)
        }
        RegKind::DipI => {
            let (penalty, g_mu_dip) =
                dip_penalty_with_grad(&enc_out.mu, reg.lambda_od, reg.lambda_d)?;
            g_mu_extra = Some(g_mu_dip);
            (kl + penalty, penalty)
        }
        RegKind::DipII => {
            let (penalty, g_z_dip) = dip_penalty_with_grad(&z, reg.lambda_od, reg.lambda_d)?;
            g_z += &g_z_dip;
            (kl + penalty, penalty)
        }
        RegKind::Btc => {
            let (terms, (g_mu_b, g_lv_b, g_z_b)) = btc_reg_with_grads(
                &enc_out.mu,
                &enc_out.logvar,
                &z,
                reg.beta,
                dataset.num_configurations(),
            )?;
            g_mu_extra = Some(g_mu_b);
            g_lv_extra = Some(g_lv_b);
            g_z += &g_z_b;
            (terms.penalty, terms.total_correlation)
        }
    };
    check_finite(
        step_no,
        &[("recon", recon), ("kl", kl), ("reg", reg_total)],
    )?;

    let (mut g_mu, mut g_lv) = reparameterize_backward(&enc_out, &eps, &g_z);
    let w = kl_weight(&reg, kl, capacity) as f32;
    if w != 0.0 {
        let (kl_mu, kl_lv) = kl_to_prior_grads(&enc_out);
        g_mu += &kl_mu.mapv(|v| v * w);
        g_lv += &kl_lv.mapv(|v| v * w);
    }
    if let Some(extra) = g_mu_extra {
        g_mu += &extra;
    }
    if let Some(extra) = g_lv_extra {
        g_lv += &extra;
    }
    state.encoder.backward(&enc_cache, &g_mu, &g_lv);

    state.adam_vae.begin_step();
    for entry in state.encoder.entries() {
        state.adam_vae.update(entry.param, entry.grad);
    }
    for entry in state.decoder.entries() {
        state.adam_vae.update(entry.param, entry.grad);
    }

    Ok(StepRecord {
        step: step_no,
        recon,
        kl,
        reg_total,
        aux,
        disc_loss: None,
    })
}

fn render_batch(
    dataset: &GroundTruthDataset,
    tuples: &[FactorTuple],
) -> Result<Array4<f32>> {
    let mut obs = Vec::with_capacity(tuples.len());
    for t in tuples {
        obs.push(dataset.render(t)?);
    }
    Ok(batch_to_array(&obs))
}

/// Advances the run to `until_step`, appending one record per step.
pub fn train_steps(
    state: &mut RunState,
    dataset: &GroundTruthDataset,
    until_step: u64,
    trace: &mut LossTrace,
) -> Result<()> {
    while state.step < until_step {
        let batch_tuples = dataset.sample_factors(state.config.batch_size, &mut state.data_rng);
        let batch = render_batch(dataset, &batch_tuples)?;
        let record = if state.config.regularizer.kind == RegKind::Factor {
            let disc_tuples =
                dataset.sample_factors(state.config.batch_size, &mut state.disc_data_rng);
            let disc_batch = render_batch(dataset, &disc_tuples)?;
            factorvae_step(state, dataset, &batch, &disc_batch)?
        } else {
            vae_step(state, dataset, &batch)?
        };
        trace.records.push(record);
    }
    Ok(())
}

/// Runs exactly `config.steps` updates from a fresh state. Deterministic
/// given the seed: identical traces and final parameters on every run.
pub fn train(
    dataset: &GroundTruthDataset,
    config: &TrainConfig,
) -> Result<(TrainedModel, LossTrace)> {
    let mut state = init_run(dataset, config)?;
    let mut trace = LossTrace::default();
    train_steps(&mut state, dataset, config.steps, &mut trace)?;
    Ok((TrainedModel::from_state(&state), trace))
}

/// Frozen encoder/decoder pair produced by a finished run.
#[derive(Clone)]
pub struct TrainedModel {
    pub encoder: Encoder<f32>,
    pub decoder: Decoder<f32>,
    pub model_config: ModelConfig,
    pub image_size: usize,
}

impl TrainedModel {
    pub fn from_state(state: &RunState) -> Self {
        Self {
            encoder: state.encoder.clone(),
            decoder: state.decoder.clone(),
            model_config: state.config.model.clone(),
            image_size: state.encoder.image_size(),
        }
    }
}

const ENCODE_CHUNK: usize = 256;

impl Representation for TrainedModel {
    fn latent_dim(&self) -> usize {
        self.model_config.latent_dim
    }

    fn codes_for(
        &self,
        dataset: &GroundTruthDataset,
        factors: &[FactorTuple],
    ) -> Result<Array2<f64>> {
        let d = self.model_config.latent_dim;
        let mut codes = Array2::<f64>::zeros((factors.len(), d));
        for (chunk_idx, chunk) in factors.chunks(ENCODE_CHUNK).enumerate() {
            let batch = render_batch(dataset, chunk)?;
            let (enc_out, _) = self.encoder.forward(&batch)?;
            let base = chunk_idx * ENCODE_CHUNK;
            for i in 0..chunk.len() {
                for j in 0..d {
                    codes[[base + i, j]] = enc_out.mu[[i, j]] as f64;
                }
            }
        }
        Ok(codes)
    }
}

/// Samples `n` factor configurations, renders and encodes them, and returns
/// the posterior means paired with the factor labels. The representation
/// used by every metric is the mean, not a sampled z.
pub fn encode_dataset(
    model: &dyn Representation,
    dataset: &GroundTruthDataset,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RepresentationMatrix> {
    if n == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let tuples = dataset.sample_factors(n, rng);
    let codes = model.codes_for(dataset, &tuples)?;
    let k = dataset.factor_space().num_factors();
    let mut factors = Array2::<usize>::zeros((n, k));
    for (i, t) in tuples.iter().enumerate() {
        for (j, &v) in t.values.iter().enumerate() {
            factors[[i, j]] = v;
        }
    }
    RepresentationMatrix::new(codes, factors, dataset.factor_space().clone())
}

// --- checkpointing ---------------------------------------------------------

const CKPT_MAGIC: &[u8; 8] = b"DISENTCK";
const CKPT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
    /// element offset into the f32 payload
    offset: usize,
    len: usize,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    run_id: String,
    step: u64,
    config: TrainConfig,
    adam_vae_t: u64,
    adam_disc_t: Option<u64>,
    rng_word_pos: RngPositions,
    tensors: Vec<TensorMeta>,
}

#[derive(Serialize, Deserialize)]
struct RngPositions {
    data: String,
    eps: String,
    disc_data: String,
    disc_eps: String,
    permute: String,
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn tensor_bytes(data: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct PayloadWriter {
    metas: Vec<TensorMeta>,
    payload: Vec<u8>,
}

impl PayloadWriter {
    fn new() -> Self {
        Self {
            metas: Vec::new(),
            payload: Vec::new(),
        }
    }

    fn push(&mut self, name: String, shape: Vec<usize>, data: &[f32]) {
        let bytes = tensor_bytes(data);
        self.metas.push(TensorMeta {
            name,
            shape,
            offset: self.payload.len() / 4,
            len: data.len(),
            sha256: sha_hex(&bytes),
        });
        self.payload.extend_from_slice(&bytes);
    }
}

/// Serializes the full run state: manifest (run id, step, config, rng
/// positions, named-tensor table with checksums) followed by raw
/// little-endian f32 payloads.
pub fn save_checkpoint(state: &RunState, run_id: &str, path: &Path) -> Result<()> {
    let mut w = PayloadWriter::new();
    for v in state.encoder.views() {
        w.push(v.name, v.shape, v.data);
    }
    for v in state.decoder.views() {
        w.push(v.name, v.shape, v.data);
    }
    if let Some(disc) = &state.discriminator {
        for v in disc.views() {
            w.push(v.name, v.shape, v.data);
        }
    }
    let (m, v) = state.adam_vae.moments();
    for (i, (m_i, v_i)) in m.iter().zip(v.iter()).enumerate() {
        w.push(format!("adam_vae.m{i}"), vec![m_i.len()], m_i);
        w.push(format!("adam_vae.v{i}"), vec![v_i.len()], v_i);
    }
    if let Some(adam) = &state.adam_disc {
        let (m, v) = adam.moments();
        for (i, (m_i, v_i)) in m.iter().zip(v.iter()).enumerate() {
            w.push(format!("adam_disc.m{i}"), vec![m_i.len()], m_i);
            w.push(format!("adam_disc.v{i}"), vec![v_i.len()], v_i);
        }
    }

    let manifest = Manifest {
        run_id: run_id.to_string(),
        step: state.step,
        config: state.config.clone(),
        adam_vae_t: state.adam_vae.t,
        adam_disc_t: state.adam_disc.as_ref().map(|a| a.t),
        rng_word_pos: RngPositions {
            data: state.data_rng.get_word_pos().to_string(),
            eps: state.eps_rng.get_word_pos().to_string(),
            disc_data: state.disc_data_rng.get_word_pos().to_string(),
            disc_eps: state.disc_eps_rng.get_word_pos().to_string(),
            permute: state.permute_rng.get_word_pos().to_string(),
        },
        tensors: w.metas,
    };
    let manifest_json = serde_json::to_vec(&manifest)?;

    let tmp = path.with_extension("ckpt.tmp");
    let result = (|| -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        f.write_all(CKPT_MAGIC)?;
        f.write_all(&CKPT_VERSION.to_le_bytes())?;
        f.write_all(&(manifest_json.len() as u64).to_le_bytes())?;
        f.write_all(&manifest_json)?;
        f.write_all(&w.payload)?;
        f.flush()?;
        Ok(())
    })();
    match result {
        Ok(()) => {
            std::fs::rename(&tmp, path)?;
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Restores a [`RunState`] that resumes bit-identically to the saved run.
pub fn load_checkpoint(path: &Path, dataset: &GroundTruthDataset) -> Result<RunState> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)
        .map_err(|_| Error::Integrity("checkpoint too short for header".into()))?;
    if &magic != CKPT_MAGIC {
        return Err(Error::Integrity("bad checkpoint magic".into()));
    }
    let mut ver = [0u8; 4];
    f.read_exact(&mut ver)
        .map_err(|_| Error::Integrity("checkpoint too short for version".into()))?;
    if u32::from_le_bytes(ver) != CKPT_VERSION {
        return Err(Error::Integrity("unsupported checkpoint version".into()));
    }
    let mut len_bytes = [0u8; 8];
    f.read_exact(&mut len_bytes)
        .map_err(|_| Error::Integrity("checkpoint too short for manifest length".into()))?;
    let manifest_len = u64::from_le_bytes(len_bytes) as usize;
    let mut manifest_json = vec![0u8; manifest_len];
    f.read_exact(&mut manifest_json)
        .map_err(|_| Error::Integrity("checkpoint truncated in manifest".into()))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_json)
        .map_err(|e| Error::Integrity(format!("manifest parse failure: {e}")))?;
    let mut payload = Vec::new();
    f.read_to_end(&mut payload)?;

    let mut tensors = std::collections::HashMap::new();
    for meta in &manifest.tensors {
        let start = meta.offset * 4;
        let end = start + meta.len * 4;
        if end > payload.len() {
            return Err(Error::Integrity(format!(
                "checkpoint truncated: tensor '{}' extends past payload",
                meta.name
            )));
        }
        let bytes = &payload[start..end];
        if sha_hex(bytes) != meta.sha256 {
            return Err(Error::Integrity(format!(
                "manifest checksum mismatch for tensor '{}'",
                meta.name
            )));
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.insert(meta.name.clone(), values);
    }

    let mut state = init_run(dataset, &manifest.config)?;
    state.step = manifest.step;

    let assign = |entries: Vec<crate::nn::TensorEntry<'_, f32>>| -> Result<()> {
        for entry in entries {
            let data = tensors.get(&entry.name).ok_or_else(|| {
                Error::Integrity(format!("checkpoint missing tensor '{}'", entry.name))
            })?;
            if data.len() != entry.param.len() {
                return Err(Error::Integrity(format!(
                    "tensor '{}' has {} elements, expected {}",
                    entry.name,
                    data.len(),
                    entry.param.len()
                )));
            }
            entry.param.copy_from_slice(data);
        }
        Ok(())
    };
    assign(state.encoder.entries())?;
    assign(state.decoder.entries())?;
    if let Some(disc) = state.discriminator.as_mut() {
        assign(disc.entries())?;
    }

    type Moments = (Vec<Vec<f32>>, Vec<Vec<f32>>);
    let load_moments = |prefix: &str| -> Result<Moments> {
        let mut m = Vec::new();
        let mut v = Vec::new();
        let mut i = 0;
        while let Some(m_i) = tensors.get(&format!("{prefix}.m{i}")) {
            let v_i = tensors.get(&format!("{prefix}.v{i}")).ok_or_else(|| {
                Error::Integrity(format!("checkpoint missing tensor '{prefix}.v{i}'"))
            })?;
            m.push(m_i.clone());
            v.push(v_i.clone());
            i += 1;
        }
        Ok((m, v))
    };
    let (m, v) = load_moments("adam_vae")?;
    state.adam_vae.restore(manifest.adam_vae_t, m, v);
    if let (Some(adam), Some(t)) = (state.adam_disc.as_mut(), manifest.adam_disc_t) {
        let (m, v) = load_moments("adam_disc")?;
        adam.restore(t, m, v);
    }

    let parse_pos = |s: &str| -> Result<u128> {
        s.parse()
            .map_err(|e| Error::Integrity(format!("bad rng position '{s}': {e}")))
    };
    state
        .data_rng
        .set_word_pos(parse_pos(&manifest.rng_word_pos.data)?);
    state
        .eps_rng
        .set_word_pos(parse_pos(&manifest.rng_word_pos.eps)?);
    state
        .disc_data_rng
        .set_word_pos(parse_pos(&manifest.rng_word_pos.disc_data)?);
    state
        .disc_eps_rng
        .set_word_pos(parse_pos(&manifest.rng_word_pos.disc_eps)?);
    state
        .permute_rng
        .set_word_pos(parse_pos(&manifest.rng_word_pos.permute)?);
    Ok(state)
}
