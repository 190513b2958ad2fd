//! PCA decomposition: the leading principal components form `z_d`, the
//! trailing ones `z_n`.

use serde::{Deserialize, Serialize};

use super::{DecompError, Result};
use crate::featstore::FeatureSet;
use crate::numkit::{sym_eigen, Matrix, NumError};

/// Fitted PCA basis with a split index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaTransform {
    mean: Vec<f64>,
    /// columns are eigenvectors of the sample covariance, descending variance
    components: Matrix,
    eigenvalues: Vec<f64>,
    split: usize,
}

impl PcaTransform {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// Fits the PCA basis of the training features (covariance normalized by
/// N) and records `split` as the `z_d`/`z_n` boundary.
pub fn pca_fit(train: &FeatureSet, split: usize) -> Result<PcaTransform> {
    let d = train.dim();
    if split == 0 || split >= d {
        return Err(DecompError::BadSplit { split, dims: d });
    }
    let n = train.len();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(train.sample(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(train.sample(i)).zip(&mean) {
            *c = v - m;
        }
        cov.rank_one_update(&centered, 1.0);
    }
    cov.scale(1.0 / n as f64);

    let (eigenvalues, components) = sym_eigen(&cov).map_err(|e| match e {
        NumError::ConvergenceFailure { .. } => DecompError::EigenFailure(e),
        other => DecompError::EigenFailure(other),
    })?;
    Ok(PcaTransform {
        mean,
        components,
        eigenvalues,
        split,
    })
}

/// Projects centered features onto the basis and splits at the boundary.
pub fn pca_apply(t: &PcaTransform, fs: &FeatureSet) -> Result<(FeatureSet, FeatureSet)> {
    let d = t.dim();
    if fs.dim() != d {
        return Err(DecompError::DimensionMismatch {
            expected: d,
            actual: fs.dim(),
        });
    }
    let n = fs.len();
    let split = t.split;
    let mut first = Matrix::zeros(n, split);
    let mut rest = Matrix::zeros(n, d - split);
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(fs.sample(i)).zip(&t.mean) {
            *c = v - m;
        }
        // projection onto column j of the basis
        let proj = t.components.vecmat(&centered);
        first.row_mut(i).copy_from_slice(&proj[..split]);
        rest.row_mut(i).copy_from_slice(&proj[split..]);
    }
    let a = FeatureSet::new(first, fs.labels().to_vec(), fs.class_count())?;
    let b = FeatureSet::new(rest, fs.labels().to_vec(), fs.class_count())?;
    Ok((a, b))
}
