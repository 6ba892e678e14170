use thiserror::Error;

/// Errors raised by the discretization, operator and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),
    #[error("series did not reach tolerance {tol:e} within {cap} terms")]
    SeriesCap { tol: f64, cap: usize },
    #[error("degenerate simplex {0} (zero volume)")]
    DegenerateSimplex(usize),
    #[error("point {0:?} lies outside the unit cube")]
    PointOutside(Vec<f64>),
    #[error("unsupported quadrature order {0} (supported: 1..=5)")]
    QuadratureOrder(usize),
    #[error("dense assembly of size {size} exceeds the guard {limit}")]
    SizeGuard { size: usize, limit: usize },
    #[error("conjugate gradient breakdown at iteration {iteration}: p'Ap = {curvature:e}")]
    CgBreakdown { iteration: usize, curvature: f64 },
    #[error("inner CG solve did not converge in Newton step {step} (relative residual {residual:e})")]
    InnerSolve { step: usize, residual: f64 },
    #[error("invalid box constraints: {0}")]
    InvalidConstraints(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
