//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A config value violates its invariant (bad cardinality, zero steps, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument is outside the domain of an operation (index out of range,
    /// shape mismatch, value outside [0,1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A representation carries no usable signal for a metric (all latent
    /// dimensions pruned, zero variance, all-zero importance, ...).
    #[error("degenerate representation: {0}")]
    DegenerateRepresentation(String),

    /// A persisted artifact fails its checksum or framing checks.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A table is missing columns required by the operation.
    #[error("schema error: {0}")]
    Schema(String),

    /// Training produced a non-finite loss; carries the offending step's
    /// diagnostic record.
    #[error("non-finite loss at step {step}: {detail}")]
    NonFinite { step: u64, detail: String },

    /// A metric failed; tags which one.
    #[error("metric '{metric}' failed: {source}")]
    Metric {
        metric: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Wraps an error with the name of the metric that raised it.
    pub fn in_metric(self, metric: &'static str) -> Self {
        Error::Metric {
            metric,
            source: Box::new(self),
        }
    }
}
