use thiserror::Error;

/// Errors raised by the toolkit. Numerical non-convergence of a correction is
/// not an error: it is reported through `CorrectionReport::success`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("illegal derivative request: {0}")]
    Request(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("extra condition error: {0}")]
    Condition(String),
    #[error("degenerate point: {0}")]
    Degenerate(String),
    #[error("point kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("stability not computed: {0}")]
    Stability(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("no suitable candidate: {0}")]
    NoCandidate(String),
    #[error("not a connecting orbit: {0}")]
    NotConnecting(String),
    #[error("measure error: {0}")]
    Measure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
