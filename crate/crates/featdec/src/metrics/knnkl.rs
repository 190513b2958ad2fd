//! k-nearest-neighbor KL divergence estimator.
//!
//! For samples `X ~ p` (n points) and `Y ~ q` (m points) in d dimensions:
//!
//! ```text
//! KL(p || q) ~= (d/n) * sum_i log(nu_k(i) / rho_k(i)) + log(m / (n-1))
//! ```
//!
//! where `rho_k(i)` is the Euclidean distance from `x_i` to its k-th nearest
//! neighbor within `X` (excluding itself) and `nu_k(i)` the distance to its
//! k-th nearest neighbor in `Y`. Zero distances from duplicate points are
//! replaced by a tiny relative jitter instead of aborting, with a warning.

use rayon::prelude::*;

use super::{MetricError, Result};
use crate::numkit::Matrix;

/// 1-D estimate; sorts both samples once and finds neighbors by expanding
/// a window around each query's insertion point.
pub fn knn_kl(sample_p: &[f64], sample_q: &[f64], k: usize) -> Result<f64> {
    let (n, m) = (sample_p.len(), sample_q.len());
    check_sizes(n, m, k)?;
    let mut sp = sample_p.to_vec();
    let mut sq = sample_q.to_vec();
    sp.sort_by(f64::total_cmp);
    sq.sort_by(f64::total_cmp);

    let terms: Vec<(f64, u32)> = sample_p
        .par_iter()
        .map(|&x| {
            // self contributes one zero distance, so rho is the (k+1)-th hit
            let rho = kth_window_distance(&sp, x, k + 1);
            let nu = kth_window_distance(&sq, x, k);
            log_ratio(nu, rho, x)
        })
        .collect();
    finish(terms, 1, n, m)
}

/// General d-dimensional estimate over the rows of two matrices.
pub fn knn_kl_points(sample_p: &Matrix, sample_q: &Matrix, k: usize) -> Result<f64> {
    if sample_p.cols() != sample_q.cols() {
        return Err(MetricError::LengthMismatch(sample_p.cols(), sample_q.cols()));
    }
    let (n, m) = (sample_p.rows(), sample_q.rows());
    check_sizes(n, m, k)?;
    if sample_p.cols() == 1 {
        return knn_kl(sample_p.data(), sample_q.data(), k);
    }

    let terms: Vec<(f64, u32)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = sample_p.row(i);
            // all-pairs distances; the self row contributes the zero
            let rho = kth_smallest_distance(sample_p, x, k + 1);
            let nu = kth_smallest_distance(sample_q, x, k);
            let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            log_ratio_scaled(nu, rho, scale)
        })
        .collect();
    finish(terms, sample_p.cols(), n, m)
}

fn check_sizes(n: usize, m: usize, k: usize) -> Result<()> {
    if k < 1 {
        return Err(MetricError::TooFewSamples { n: k, k: 1 });
    }
    if n <= k {
        return Err(MetricError::TooFewSamples { n, k });
    }
    if m <= k {
        return Err(MetricError::TooFewSamples { n: m, k });
    }
    Ok(())
}

/// k-th smallest |v - x| over a sorted slice, counting multiplicity.
fn kth_window_distance(sorted: &[f64], x: f64, k: usize) -> f64 {
    let start = sorted.partition_point(|&v| v < x);
    let mut left = start; // left neighbor lives at left-1
    let mut right = start;
    let mut dist = 0.0;
    for _ in 0..k {
        let dl = if left > 0 { x - sorted[left - 1] } else { f64::INFINITY };
        let dr = if right < sorted.len() { sorted[right] - x } else { f64::INFINITY };
        if dl <= dr {
            dist = dl;
            left -= 1;
        } else {
            dist = dr;
            right += 1;
        }
    }
    dist
}

/// k-th smallest Euclidean distance from `x` to the rows of `pts`.
fn kth_smallest_distance(pts: &Matrix, x: &[f64], k: usize) -> f64 {
    let mut d2: Vec<f64> = (0..pts.rows())
        .map(|r| {
            pts.row(r)
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .collect();
    let (_, kth, _) = d2.select_nth_unstable_by(k - 1, f64::total_cmp);
    kth.sqrt()
}

fn log_ratio(nu: f64, rho: f64, x: f64) -> (f64, u32) {
    log_ratio_scaled(nu, rho, x.abs())
}

/// log(nu/rho) with zero distances nudged to a relative epsilon.
fn log_ratio_scaled(mut nu: f64, mut rho: f64, scale: f64) -> (f64, u32) {
    let eps = 1e-12 * scale.max(1.0);
    let mut jittered = 0;
    if rho == 0.0 {
        rho = eps;
        jittered += 1;
    }
    if nu == 0.0 {
        nu = eps;
        jittered += 1;
    }
    ((nu / rho).ln(), jittered)
}

fn finish(terms: Vec<(f64, u32)>, dim: usize, n: usize, m: usize) -> Result<f64> {
    let jittered: u32 = terms.iter().map(|t| t.1).sum();
    if jittered > 0 {
        log::warn!("knn_kl: {jittered} zero neighbor distances jittered (duplicate points)");
    }
    // sequential sum keeps the result independent of the thread count
    let sum: f64 = terms.iter().map(|t| t.0).sum();
    Ok(dim as f64 / n as f64 * sum + ((m as f64) / (n as f64 - 1.0)).ln())
}
