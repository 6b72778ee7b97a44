use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MmError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("region of dimension {dim} is larger than the base dimension {base}")]
    NotBaseCase { dim: usize, base: usize },
    #[error("allocation of {0} elements failed")]
    AllocFailure(usize),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("region is not aligned to the {0}x{0} tile grid")]
    AlignmentError(usize),
    #[error("the semiring has no additive inverse")]
    NoAdditiveInverse,
    #[error("internal error: {0}")]
    InternalError(String),
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, MmError>;
