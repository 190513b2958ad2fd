//! Symmetric eigendecomposition via cyclic Jacobi rotations.

use super::matrix::Matrix;
use super::{NumError, Result};

const MAX_SWEEPS: usize = 100;
const OFFDIAG_TOL: f64 = 1e-12;

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted descending and the matching eigenvectors as
/// the columns of the returned matrix. Convergence is declared when every
/// off-diagonal entry falls below `1e-12` relative to the matrix scale.
pub fn sym_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    assert_eq!(m.rows(), m.cols(), "sym_eigen needs a square matrix");
    let n = m.rows();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let tol = OFFDIAG_TOL * scale;

    let mut sweeps = 0;
    loop {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off <= tol {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(NumError::ConvergenceFailure {
                sweeps,
                offdiag: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                // classic Jacobi rotation annihilating a_pq
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}
