use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside the domain [0, {upper})")]
    Domain { value: f64, upper: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate transform: {0}")]
    Degenerate(String),

    #[error("value {value} outside the attainable range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("scalar solver did not converge for component {component}")]
    NonConvergence { component: usize },

    #[error("problem has no true solution attached")]
    MissingTruth,

    #[error("need at least {required} usable samples, found {found}")]
    InsufficientSamples { found: usize, required: usize },

    #[error("xi is not a subgradient at z (violation {violation:e})")]
    NotASubgradient { violation: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
