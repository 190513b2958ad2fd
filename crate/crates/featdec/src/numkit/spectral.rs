//! Largest-singular-value estimation by power iteration.

use super::matrix::Matrix;

/// Estimates the spectral norm (largest singular value) of `w`.
///
/// Runs power iteration on `W^T W` without forming it, starting from the
/// column-norm vector so the start is never orthogonal to the dominant
/// right-singular vector by construction of the seed. A zero matrix gives 0.
pub fn spectral_norm(w: &Matrix, iters: usize, tol: f64) -> f64 {
    assert!(iters >= 1, "at least one iteration required");
    let (sigma, _) = spectral_norm_warm(w, None, iters, tol);
    sigma
}

/// Power iteration with an optional warm-start vector; returns the estimate
/// and the right-singular vector for reuse as the next warm start.
pub fn spectral_norm_warm(
    w: &Matrix,
    warm: Option<&[f64]>,
    iters: usize,
    tol: f64,
) -> (f64, Vec<f64>) {
    let n = w.cols();
    let mut v: Vec<f64> = Vec::new();
    if let Some(prev) = warm {
        if prev.len() == n {
            let mut p = prev.to_vec();
            if normalize(&mut p) {
                v = p;
            }
        }
    }
    if v.is_empty() {
        // seed with column norms; a zero matrix has norm 0
        let mut seed: Vec<f64> = (0..n)
            .map(|j| (0..w.rows()).map(|i| w[(i, j)].powi(2)).sum::<f64>().sqrt())
            .collect();
        if !normalize(&mut seed) {
            return (0.0, unit_vector(n));
        }
        v = seed;
    }

    let mut sigma = 0.0;
    for _ in 0..iters {
        let wv = w.matvec(&v);
        let next_sigma = wv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if next_sigma == 0.0 {
            return (0.0, v);
        }
        let mut next_v = w.vecmat(&wv); // W^T (W v)
        if !normalize(&mut next_v) {
            return (next_sigma, v);
        }
        let converged = (next_sigma - sigma).abs() <= tol * next_sigma.max(f64::MIN_POSITIVE);
        sigma = next_sigma;
        v = next_v;
        if converged {
            break;
        }
    }
    (sigma, v)
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

fn unit_vector(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    if n > 0 {
        v[0] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{sym_eigen, Rng};

    #[test]
    fn diagonal_norm_is_max_abs_entry() {
        let w = Matrix::diag(&[2.0, 1.0]);
        assert!((spectral_norm(&w, 100, 1e-12) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_norm_is_zero() {
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3), 10, 1e-12), 0.0);
    }

    #[test]
    fn matches_eigen_oracle_on_wtw() {
        let mut rng = Rng::new(5);
        let w = Matrix::from_fn(4, 4, |_, _| rng.next_uniform(-1.0, 1.0));
        let estimate = spectral_norm(&w, 500, 1e-14);
        let wtw = w.transpose().matmul(&w);
        let (vals, _) = sym_eigen(&wtw).unwrap();
        let oracle = vals[0].sqrt();
        assert!(
            (estimate - oracle).abs() < 1e-6 * oracle.max(1.0),
            "estimate {estimate} vs oracle {oracle}"
        );
    }

    #[test]
    fn scaling_homogeneity() {
        let mut rng = Rng::new(6);
        let w = Matrix::from_fn(5, 3, |_, _| rng.next_uniform(-1.0, 1.0));
        let c = -2.75;
        let mut cw = w.clone();
        cw.scale(c);
        let a = spectral_norm(&w, 500, 1e-14);
        let b = spectral_norm(&cw, 500, 1e-14);
        assert!((b - c.abs() * a).abs() < 1e-6 * b.max(1.0));
    }
}
