use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("move {index} out of range (neighborhood size {len})")]
    MoveOutOfRange { index: usize, len: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("all proposal weights are zero: isolated state")]
    IsolatedState,
    #[error("state space of size {size} exceeds cap {cap}")]
    StateSpaceOverflow { size: u128, cap: usize },
    #[error("kernel is not reversible (max flow asymmetry {max_violation:e})")]
    NotReversible { max_violation: f64 },
    #[error("kernel is reducible: eigenvalue 1 has multiplicity {multiplicity}")]
    Reducible { multiplicity: usize },
    #[error("block selection produced an empty block")]
    EmptyBlock,
}

pub type Result<T> = core::result::Result<T, Error>;
