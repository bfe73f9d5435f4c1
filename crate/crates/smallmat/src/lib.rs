//! Small dense matrix kernel for control-law verification.
//!
//! Provides the handful of numeric routines the simulator and certificate
//! checkers need: a row-major [`Matrix`], the matrix exponential, a
//! definiteness test, a positive semidefinite square root, and an LU-based
//! linear solve. Every matrix in the workspace is at most a dozen rows, so
//! the implementations favor clarity and tight tolerances over throughput.

mod error;
mod expm;
mod factor;
mod matrix;
mod stability;

pub use error::MatError;
pub use expm::expm;
pub use factor::{inverse, is_positive_definite, psd_factor, solve, sym_eig};
pub use matrix::Matrix;
pub use stability::is_hurwitz;

/// Default pivot tolerance for definiteness tests.
pub const DEFAULT_PD_TOL: f64 = 1e-9;
