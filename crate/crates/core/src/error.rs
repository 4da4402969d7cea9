use thiserror::Error;

use crate::solver::IterationTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element {element} is not convex")]
    NonConvexElement { element: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("model violates coefficient bounds: {0}")]
    ModelBounds(String),

    #[error("theta requires coefficient derivative")]
    MissingDerivative,

    #[error("model supplies no exact gradient")]
    MissingExactGradient,

    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("linear solve stalled at relative residual {residual:e} (tolerance {tolerance:e})")]
    Residual { residual: f64, tolerance: f64 },

    #[error("nonlinear solver did not converge within {} iterations (last increment {:e})",
        trace.increments.len(), trace.increments.last().copied().unwrap_or(f64::NAN))]
    NotConverged { trace: IterationTrace },

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
