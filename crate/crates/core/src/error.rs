use ndarray::Array2;
use thiserror::Error;

/// Errors produced by the fairloop library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A group whose normalising denominator is zero (no relevance mass).
    #[error("degenerate group {group}: zero relevance mass")]
    DegenerateGroup { group: usize },

    #[error("optimization infeasible")]
    Infeasible,

    #[error("optimization unbounded")]
    Unbounded,

    /// The support of the residual matrix admits no perfect matching.
    #[error("birkhoff decomposition failed: no perfect matching on residual support")]
    DecompositionFailure { residual: Array2<f64> },

    /// A solver result that fails its own post-conditions.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("controller horizon exhausted at t = {t} (T = {horizon})")]
    HorizonExhausted { t: usize, horizon: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
