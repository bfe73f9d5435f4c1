//! Error type shared by the numeric routines.

use thiserror::Error;

/// Failure cases for the factorization and solver routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    /// An operation that needs a square matrix got `rows x cols`.
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: &'static str },
    /// A pivot fell below the conditioning threshold during elimination.
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at step {step})")]
    Singular { step: usize, pivot: f64 },
    /// The matrix has an eigenvalue below the negative tolerance, so no
    /// positive semidefinite factorization exists.
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },
}
