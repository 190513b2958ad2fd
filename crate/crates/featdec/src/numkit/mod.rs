//! Dense linear algebra and seeded sampling used by every other module.
//!
//! Everything here works on row-major `f64` matrices. The solvers are
//! deliberately plain (unblocked Cholesky, cyclic Jacobi, power iteration):
//! feature dimensions in this crate stay in the hundreds, where robustness
//! and determinism matter more than peak throughput.

mod cholesky;
mod eigen;
mod matrix;
mod rng;
mod spectral;

pub use cholesky::{cholesky_spd, SpdFactor};
pub use eigen::sym_eigen;
pub use matrix::Matrix;
pub use rng::{gaussian_sample, Rng};
pub use spectral::{spectral_norm, spectral_norm_warm};

use thiserror::Error;

/// Errors from the dense kernels.
#[derive(Debug, Error)]
pub enum NumError {
    #[error("matrix is not positive-definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("eigen solver did not converge within {sweeps} sweeps (off-diagonal {offdiag:.3e})")]
    ConvergenceFailure { sweeps: usize, offdiag: f64 },
}

pub type Result<T> = std::result::Result<T, NumError>;
