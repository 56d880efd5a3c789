use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("need more than {lags} observations, got {rows}")]
    InsufficientData { rows: usize, lags: usize },

    #[error("matrix is not positive definite (failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_diff:e})")]
    NotSymmetric { max_diff: f64 },

    #[error("non-finite value detected in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("target of {target} expected clusters is unreachable; achievable range is [{low:.4}, {high:.4}]")]
    CalibrationUnreachable { target: f64, low: f64, high: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("draw store format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::NonFinite(_) | Error::NotSymmetric { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
