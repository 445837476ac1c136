use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("component index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("logistic labels must be -1 or +1 (row {row} has {label})")]
    InvalidLabel { row: usize, label: f64 },
    #[error("scalar prox did not converge within {0} iterations")]
    ProxNoConvergence(usize),
    #[error("operation not supported for this loss: {0}")]
    Unsupported(&'static str),
    #[error("reference solver did not converge (gradient norm {grad_norm:e} after {iterations} iterations)")]
    SolverNoConvergence { iterations: usize, grad_norm: f64 },
    #[error("undefined: {0}")]
    Undefined(&'static str),
}
