use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension d = {0} is not supported (d >= 3 required)")]
    Dimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integer overflow computing {0}")]
    Overflow(&'static str),

    #[error("non-finite value {value} at t = {at}")]
    NonFinite { value: f64, at: f64 },

    #[error("envelope value {value} at t = {at} is outside [0, 1]")]
    EnvelopeRange { value: f64, at: f64 },

    #[error("matrix is not symmetric: |m[{i},{j}] - m[{j},{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("resolution R = {r} needs {needed} eigenvalues but only {available} are available")]
    ResolutionTooLarge { r: usize, needed: usize, available: usize },

    #[error("size-constrained clustering did not converge after {0} tree rebuilds")]
    ClusteringStalled(usize),

    #[error("expected count {expected:e} in bin {bin} is too small")]
    DegenerateBin { bin: usize, expected: f64 },

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
