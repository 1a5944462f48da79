use thiserror::Error;

/// Errors raised by the modeling and evaluation layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("transaction is not eligible for modeling: {0}")]
    Ineligible(String),

    #[error("invalid transaction: {0}")]
    InvalidTransaction(String),

    #[error("unknown transaction id {0}")]
    UnknownId(u64),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("need at least two non-empty clusters")]
    TooFewClusters,

    #[error("{0} out of range")]
    OutOfRange(String),

    #[error("invalid fraud specification: {0}")]
    InvalidFraudSpec(String),

    #[error("invalid benchmark descriptor: {0}")]
    InvalidDescriptor(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
