use thiserror::Error;

/// Failure modes of the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("height field is not admissible: 1 + b0*h = {value:.3e} at sample {index}")]
    AdmissibilityViolation { index: usize, value: f64 },

    #[error("mollifier length {epsilon} is outside (0, 1]")]
    KernelSupport { epsilon: f64 },

    #[error("damped height evolution requires epsilon > 0")]
    DegenerateDamping,

    #[error("ALE map is not a diffeomorphism: min J = {min_jacobian:.3e}")]
    NotDiffeomorphism { min_jacobian: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("linear solver stalled after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("coefficient tensor violates its symmetries at node {node} (deviation {deviation:.3e})")]
    CoefficientSymmetryViolation { node: usize, deviation: f64 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last increment {increment:.3e})")]
    FixedPointDivergence { iterations: usize, increment: f64 },

    #[error("smallness gate violated: |h|_H1.7 = {norm:.4e} >= {threshold:.4e}")]
    SmallnessViolation { norm: f64, threshold: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
