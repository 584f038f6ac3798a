//! Disentangled representation learning toolkit.
//!
//! The crate bundles everything needed to run desk-scale disentanglement
//! studies end to end:
//!
//! - [`dataset`]: a procedural image dataset with known, independent
//!   ground-truth factors and the fixed-factor sampling the metrics need.
//! - [`vae`]: convolutional encoder/decoder, reparameterization, and the
//!   reconstruction / KL terms of the variational bound.
//! - [`regularizers`]: the VAE-family regularization terms (beta, annealed
//!   capacity, factor/total-correlation, DIP covariance, beta-TC) plus the
//!   permuted-batch discriminator used by the factor kind.
//! - [`training`]: seeded SGD loop with alternating discriminator updates,
//!   loss traces, and exact-resume checkpoints.
//! - [`metrics`]: FactorVAE score, MIG, SAP, DCI, and IRS.
//! - [`runner`]: config-driven sweeps, JSONL persistence, aggregation,
//!   ranking, and report emission.

pub mod config;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod regularizers;
pub mod runner;
pub mod training;
pub mod vae;

pub use error::{Error, Result};
