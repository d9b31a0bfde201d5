use thiserror::Error;

/// Errors raised by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed word: {0}")]
    MalformedWord(String),

    #[error("group mismatch: {left} vs {right}")]
    GroupMismatch { left: String, right: String },

    #[error("capacity exceeded: {requested} elements requested, cap is {cap}")]
    Capacity { requested: usize, cap: usize },

    #[error("degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid exponent {0}: must satisfy p >= 1")]
    InvalidExponent(f64),

    #[error("matrix is not unitary: ||U*U - I|| = {0:e}")]
    NotUnitary(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported norm computation: {0}")]
    Unsupported(String),

    #[error("no convergence after {iterations} iterations (last estimate {last}, last change {change:e})")]
    Convergence {
        iterations: usize,
        last: f64,
        change: f64,
    },

    #[error("linear map does not match span: {0}")]
    SpanMismatch(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("edge function support touches the outer shell at edge {0}")]
    SupportTouchesBoundary(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// The request itself was malformed (bad config, bad arguments).
    Usage,
    /// The request was valid but the computation could not complete.
    Runtime,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_)
            | Error::MalformedWord(_)
            | Error::InvalidExponent(_)
            | Error::InvalidArgument(_)
            | Error::GroupMismatch { .. } => ErrorCategory::Usage,
            _ => ErrorCategory::Runtime,
        }
    }

    /// Short machine-readable tag, stable across releases.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::MalformedWord(_) => "malformed-word",
            Error::GroupMismatch { .. } => "group-mismatch",
            Error::Capacity { .. } => "capacity",
            Error::DegreeMismatch { .. } => "degree-mismatch",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidExponent(_) => "invalid-exponent",
            Error::NotUnitary(_) => "not-unitary",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Unsupported(_) => "unsupported",
            Error::Convergence { .. } => "convergence",
            Error::SpanMismatch(_) => "span-mismatch",
            Error::DomainTooSmall(_) => "domain-too-small",
            Error::SupportTouchesBoundary(_) => "support-touches-boundary",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Serialization(_) => "serialization",
        }
    }
}
