use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point ({x}, {y}) lies outside the closed unit square")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("meshes are not nested: coarse M={coarse}, fine M={fine}")]
    NotNested { coarse: usize, fine: usize },

    #[error("cut-cell quadrature did not reach tolerance {tol:e} within depth {depth} on triangle {triangle}")]
    QuadratureFailure { triangle: usize, depth: usize, tol: f64 },

    #[error("non-finite value of the source term at u = {u}")]
    NonFiniteSource { u: f64 },

    #[error(
        "fixed-point iteration failed at step {step} after {iterations} iterations \
         (last relative update {last_update:e}, tau^alpha*L = {guard:.3e}): {reason}"
    )]
    FixedPointDivergence { step: usize, iterations: usize, last_update: f64, guard: f64, reason: &'static str },

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
