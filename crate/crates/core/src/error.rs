use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input contains NaN or infinite entries")]
    NonFinite,
    #[error("intermediate magnitudes exceed the representable range")]
    Overflow,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("Cesàro mean did not converge after {terms} terms (residual {residual:e})")]
    NoConvergence { terms: usize, residual: f64 },
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("matrix is not an orthogonal projector (deviation {0:e})")]
    NotProjector(f64),
    #[error("operator is not a contraction (norm {0})")]
    NotContraction(f64),
    #[error("superoperator matrix of size {0}² exceeds the 4096 guard")]
    TooLarge(usize),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("method unavailable: {0}")]
    MethodUnavailable(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("n = {n} is not divisible by the cycle length {k}")]
    NotDivisible { n: usize, k: usize },
    #[error("n = {0} must be even")]
    OddN(usize),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
