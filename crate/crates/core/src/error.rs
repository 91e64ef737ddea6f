use thiserror::Error;

/// Errors raised by the discretization, the solvers and the optimizer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A sparse factorization or solve did not meet its residual target.
    #[error("linear solver failure: {reason} (relative residual {residual:.3e}, condition estimate {condition:.3e})")]
    SolverFailure {
        reason: String,
        residual: f64,
        condition: f64,
    },

    #[error("Newton iteration failed on interval {interval} (last residual {residual:.3e})")]
    NonlinearSolverFailure { interval: usize, residual: f64 },

    #[error("blow-up detected on interval {interval}: max |y| = {max_abs:.3e}")]
    BlowUpDetected { interval: usize, max_abs: f64 },

    #[error("root finding failed: {0}")]
    RootFindFailure(String),

    #[error("line search failed after {trials} trials")]
    LineSearchFailure { trials: usize },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
