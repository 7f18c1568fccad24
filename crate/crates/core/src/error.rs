use thiserror::Error;

/// Errors raised by the symbolic and numeric routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma pole at x = {0}; use rgamma for the entire reciprocal")]
    Pole(f64),

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),

    #[error("exponent-domain error: exponent {exponent} on coordinate {coord} must exceed -1")]
    ExponentDomain { coord: usize, exponent: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("boundary value at the initial point of coordinate {coord} is singular (exponent {exponent})")]
    BoundarySingularity { coord: usize, exponent: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
