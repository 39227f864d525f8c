use thiserror::Error;

use crate::adhm::AffinePoint;

/// Errors produced by monad validation, field evaluation and the solvers.
#[derive(Debug, Clone, Error)]
pub enum MonadError {
    #[error("dimension mismatch in field `{field}`: expected {expected_rows}x{expected_cols}, got {got_rows}x{got_cols}")]
    DimensionMismatch {
        field: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },

    #[error("psi = A*A is singular at point {point:?}")]
    SingularPsi { point: AffinePoint },

    #[error("monad is degenerate at {points:?}")]
    DegenerateMonad { points: Vec<AffinePoint> },

    #[error("{what} did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("integration grid contains a degeneracy point at {point:?}")]
    GridContainsDegeneracy { point: AffinePoint },

    #[error("target violates the constraint space: {what}")]
    ConstraintViolation { what: String },

    #[error("eigenvalue of modulus {modulus:.3e} lies outside the allowed disk of radius {radius:.3e}")]
    SpectrumOutsideDisk { modulus: f64, radius: f64 },

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },
}

pub type Result<T> = std::result::Result<T, MonadError>;
