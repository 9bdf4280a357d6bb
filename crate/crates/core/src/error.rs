use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: size {size} exceeds capacity {cap}")]
    Capacity {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("Gram system of order {order} is singular at dimension {dim} (need dim >= order)")]
    Singular { order: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unknown constant matrix `{0}`")]
    UnknownConstant(String),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("no value recorded for tuple {0:?}")]
    MissingOrder(Vec<usize>),
    #[error("m = n = 1 has no spoke reduction")]
    NoReduction,
    #[error("empty sample")]
    EmptySample,
    #[error("matrix is not self-adjoint (deviation {0:e})")]
    NotSelfAdjoint(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    /// Capacity and domain errors map to a distinct CLI exit status.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Capacity { .. } | Error::Singular { .. } | Error::NoReduction
        )
    }
}
