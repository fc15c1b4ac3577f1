use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the mathematical or physical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Exact joint-space evolution requested for more emitters than it can hold.
    #[error("capacity exceeded: {n} emitters requested, full-space limit is {max}; use the ladder path")]
    Capacity { n: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    /// Kernel cannot be inverted (for instance zero coupling).
    #[error("singular kernel: {0}")]
    SingularKernel(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
