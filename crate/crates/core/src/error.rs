//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row could not be parsed. `line` is 1-based and counts the
    /// header row.
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    /// Timestamps are not strictly increasing. For programmatic
    /// construction `line` is the 1-based bar position.
    #[error("line {line}: timestamps must be strictly increasing")]
    OrderViolation { line: usize },

    /// A bar violates its price invariants (high < low, non-positive
    /// price, ...).
    #[error("line {line}: {reason}")]
    RangeViolation { line: usize, reason: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("series of length {len} is too short, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("weight vector sums to zero")]
    ZeroWeightSum,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Residual variance of a measurement update was not strictly positive.
    #[error("singular residual variance {0}")]
    SingularResidual(f64),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("need {needed} bars of history, have {have}")]
    InsufficientHistory { have: usize, needed: usize },

    #[error("no closed trades in ledger")]
    EmptyLedger,

    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(#[from] serde_json::Error),
}
