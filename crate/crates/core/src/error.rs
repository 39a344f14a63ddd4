//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The two training priors coincide (or were pushed out of range), so
    /// the correction coefficients are undefined.
    #[error("degenerate priors: {0}")]
    DegeneratePriors(String),

    /// A class prior of 0 or 1 means there is only a single class.
    #[error("single-class problem: {0}")]
    SingleClass(String),

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested loss cannot be used here (e.g. gradients of zero-one).
    #[error("unsupported loss: {0}")]
    UnsupportedLoss(String),

    /// The simplified cost-sensitive estimator needs ℓ(z)+ℓ(−z)=1.
    #[error("loss is not symmetric: {0}")]
    NonSymmetricLoss(String),

    /// Vector/matrix dimensions do not line up.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    /// An estimator was handed an empty sample.
    #[error("empty sample: {0}")]
    EmptySample(String),

    /// The exact risk oracle only covers linear scorers.
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    /// A data pool ran out and replacement sampling is impossible.
    #[error("data exhausted: {0}")]
    DataExhausted(String),

    /// CSV parse failure, with the 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Training produced a non-finite gradient or risk and was stopped.
    #[error("run aborted at epoch {epoch}: {msg}")]
    AbortedRun { epoch: usize, msg: String },

    /// A computed quantity came out non-finite outside of training.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
