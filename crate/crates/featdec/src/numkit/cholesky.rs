//! Cholesky factorization of symmetric positive-definite matrices.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use super::{NumError, Result};

/// Cholesky factor `L` of an SPD matrix `A = L L^T`, with the log-determinant
/// of `A` cached (`log det A = 2 sum log L_ii`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpdFactor {
    dim: usize,
    lower: Matrix,
    log_det: f64,
}

/// Factors a symmetric positive-definite matrix.
///
/// Only the lower triangle of `m` is read; callers are expected to pass a
/// matrix that is symmetric to working precision. A non-positive pivot
/// reports [`NumError::NotPositiveDefinite`] so callers can regularize and
/// retry.
pub fn cholesky_spd(m: &Matrix) -> Result<SpdFactor> {
    assert_eq!(m.rows(), m.cols(), "cholesky needs a square matrix");
    let n = m.rows();
    let mut lower = Matrix::zeros(n, n);
    let mut log_det = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= lower[(i, k)] * lower[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(NumError::NotPositiveDefinite { row: i, pivot: s });
                }
                let l = s.sqrt();
                lower[(i, i)] = l;
                log_det += 2.0 * l.ln();
            } else {
                lower[(i, j)] = s / lower[(j, j)];
            }
        }
    }
    Ok(SpdFactor {
        dim: n,
        lower,
        log_det,
    })
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `(L L^T) x = v`.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.forward_solve(v)?;
        // back substitution: L^T x = y
        for i in (0..self.dim).rev() {
            let mut s = x[i];
            for k in (i + 1)..self.dim {
                s -= self.lower[(k, i)] * x[k];
            }
            x[i] = s / self.lower[(i, i)];
        }
        Ok(x)
    }

    /// Solves `L y = v` (forward substitution only).
    pub fn forward_solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(NumError::DimensionMismatch {
                expected: self.dim,
                actual: v.len(),
            });
        }
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.lower.row(i)[..i];
            y[i] = (v[i] - dot(row, &y[..i])) / self.lower[(i, i)];
        }
        Ok(y)
    }

    /// `v^T (L L^T)^{-1} v`, computed as `||L^{-1} v||^2` so the result is
    /// a sum of squares and can never go negative.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        let y = self.forward_solve(v)?;
        Ok(y.iter().map(|x| x * x).sum())
    }

    /// Reconstructs `L L^T`; mostly useful in tests.
    pub fn reconstruct(&self) -> Matrix {
        self.lower.matmul(&self.lower.transpose())
    }
}
