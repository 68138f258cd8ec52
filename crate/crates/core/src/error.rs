use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tensor of {bytes} bytes exceeds the memory cap of {cap} bytes")]
    MemoryCap { bytes: u128, cap: u128 },

    #[error("tensor is not symmetric: T[{i},{j},{k}] differs from its permutations")]
    NotSymmetric { i: usize, j: usize, k: usize },

    #[error("sketch mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("degenerate iteration: {0}")]
    Degenerate(String),

    #[error("moment matrix is rank deficient at index {index} (singular value {value:e})")]
    RankDeficient { index: usize, value: f64 },

    #[error("component {component} has a zero eigenvalue")]
    ZeroEigenvalue { component: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures caused by malformed input files rather than bad
    /// arguments or numerics.
    pub fn is_input_format(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Format(_) | Error::Io(_))
    }

    /// True for numerical failures (rank deficiency, degenerate iterations).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::RankDeficient { .. } | Error::ZeroEigenvalue { .. }
        )
    }
}
