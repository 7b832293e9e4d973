use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("input too short: need at least {needed}, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("insufficient entropy: {0}")]
    InsufficientEntropy(String),

    /// Dark/lit variance estimates are inconsistent with a non-negative
    /// quantum contribution.
    #[error("variance estimation failed: {0}")]
    Estimation(String),

    #[error(
        "empty validity mask: settle time {settle_s:.3e} s plus guard {guard_s:.3e} s \
         does not fit in the {slot_s:.3e} s QRNG slot"
    )]
    EmptyMask { settle_s: f64, guard_s: f64, slot_s: f64 },

    #[error("frequency offset ambiguity: {0}")]
    Ambiguity(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("extracted output failed {failed} of {total} instances (at most {floor} allowed)")]
    SuiteBelowFloor { failed: usize, total: usize, floor: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
