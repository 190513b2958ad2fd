//! Seeded random sampling.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::cholesky::SpdFactor;
use super::matrix::Matrix;
use super::{NumError, Result};

/// Counter-based generator seeded from a `u64`.
///
/// Identical seeds produce identical streams. Independent streams for
/// parallel work come from [`Rng::with_stream`], which keeps the seed and
/// varies the ChaCha stream id.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Same seed, independent stream; streams never overlap.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn next_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return lo;
        }
        self.inner.gen_range(lo..hi)
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }
}

/// Draws `n` samples from `N(mean, L L^T)` as the rows of the returned
/// matrix, via `x = mean + L e` with `e` standard normal.
pub fn gaussian_sample(rng: &mut Rng, mean: &[f64], cov_factor: &SpdFactor, n: usize) -> Result<Matrix> {
    let d = cov_factor.dim();
    if mean.len() != d {
        return Err(NumError::DimensionMismatch {
            expected: d,
            actual: mean.len(),
        });
    }
    let lower = cov_factor.lower();
    let mut out = Matrix::zeros(n, d);
    let mut eps = vec![0.0; d];
    for i in 0..n {
        for e in eps.iter_mut() {
            *e = rng.next_standard_normal();
        }
        let row = out.row_mut(i);
        for j in 0..d {
            // L is lower triangular: only the first j+1 entries matter
            let lj = &lower.row(j)[..=j];
            row[j] = mean[j] + lj.iter().zip(&eps).map(|(l, e)| l * e).sum::<f64>();
        }
    }
    Ok(out)
}
