//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("transformation parameters infeasible: {0}")]
    InfeasibleParams(String),

    #[error("descent condition violated at iteration {iteration}: {details}")]
    DescentViolation { iteration: usize, details: String },

    #[error("inner solver diverged: {0}")]
    InnerSolverDiverged(String),

    #[error("kappa bracket not found after {probes} probes")]
    BracketNotFound { probes: usize },

    #[error(
        "residual target epsilon={epsilon:.3e} not reached: residual {residual:.3e} after {iters} iterations"
    )]
    InfeasibleEpsilon {
        epsilon: f64,
        residual: f64,
        iters: usize,
    },

    #[error("singular transform: {0}")]
    SingularTransform(String),
}

pub type Result<T> = std::result::Result<T, Error>;
