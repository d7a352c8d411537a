use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("entry {index} is {value}; entries must be finite and nonnegative")]
    InvalidEntry { index: usize, value: f64 },

    #[error("no positive entry")]
    NoPositiveEntry,

    #[error("degenerate normalization")]
    DegenerateNormalization,

    #[error("not a probability vector (sum = {sum})")]
    NotProbability { sum: f64 },

    #[error("Hilbert metric requires strict positivity")]
    NotStrictlyPositive,

    #[error("row {row} is identically zero")]
    ZeroRow { row: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("collinear trajectory")]
    CollinearTrajectory,

    #[error("not primitive within cap ({cap} steps)")]
    CapExceeded { cap: u64 },

    #[error("rate fit needs at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("empty matrix family")]
    EmptyFamily,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
