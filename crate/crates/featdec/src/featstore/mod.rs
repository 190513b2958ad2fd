//! Feature-set data model, persistence, and synthetic benchmark generators.

mod format;
mod toy;

pub use format::{load_featureset, save_featureset, Format};
pub use toy::{gen_toy2d, gen_toy128, ToyCase, ToyData, ToySpec};

use thiserror::Error;

use crate::numkit::Matrix;

/// Label value marking an unlabeled sample.
pub const UNLABELED: i32 = -1;

#[derive(Debug, Error)]
pub enum FeatError {
    #[error("format error: {0}")]
    Format(String),

    #[error("label {label} out of range for {classes} classes (sample {sample})")]
    LabelOutOfRange {
        sample: usize,
        label: i32,
        classes: u32,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad split index {split} for {dims} feature dimensions")]
    BadSplit { split: usize, dims: usize },
}

pub type Result<T> = std::result::Result<T, FeatError>;

/// N samples of D-dimensional features with optional integer labels.
///
/// `class_count` is 0 for fully unlabeled sets; otherwise every label is in
/// `0..class_count` or [`UNLABELED`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    features: Matrix,
    labels: Vec<i32>,
    class_count: u32,
}

impl FeatureSet {
    pub fn new(features: Matrix, labels: Vec<i32>, class_count: u32) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(FeatError::Format(format!(
                "{} labels for {} samples",
                labels.len(),
                features.rows()
            )));
        }
        for (i, &l) in labels.iter().enumerate() {
            if l != UNLABELED && (l < 0 || l as u32 >= class_count) {
                return Err(FeatError::LabelOutOfRange {
                    sample: i,
                    label: l,
                    classes: class_count,
                });
            }
        }
        Ok(FeatureSet {
            features,
            labels,
            class_count,
        })
    }

    pub fn unlabeled(features: Matrix) -> Self {
        let n = features.rows();
        FeatureSet {
            features,
            labels: vec![UNLABELED; n],
            class_count: 0,
        }
    }

    /// Sample count.
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Indices of samples labeled `c`.
    pub fn class_indices(&self, c: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c as i32)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rounds every feature through `f32`, matching what persistence does.
    pub fn quantize_f32(&self) -> FeatureSet {
        let mut q = self.clone();
        for v in q.features.data_mut() {
            *v = *v as f32 as f64;
        }
        q
    }

    /// Replaces the label vector (used to regroup OoD populations).
    pub fn with_labels(&self, labels: Vec<i32>, class_count: u32) -> Result<FeatureSet> {
        FeatureSet::new(self.features.clone(), labels, class_count)
    }

    /// Stacks two sets with the same dimension; labels are preserved.
    pub fn concat_rows(&self, other: &FeatureSet) -> Result<FeatureSet> {
        if self.dim() != other.dim() {
            return Err(FeatError::Format(format!(
                "cannot concat dims {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut data = self.features.data().to_vec();
        data.extend_from_slice(other.features.data());
        let features = Matrix::from_vec(self.len() + other.len(), self.dim(), data);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let class_count = self.class_count.max(other.class_count);
        FeatureSet::new(features, labels, class_count)
    }
}

/// Splits columns at `split`: the first set keeps columns `[0, split)`, the
/// second `[split, dim)`. Labels are carried into both halves.
pub fn split_dims(fs: &FeatureSet, split: usize) -> Result<(FeatureSet, FeatureSet)> {
    let d = fs.dim();
    if split == 0 || split >= d {
        return Err(FeatError::BadSplit { split, dims: d });
    }
    let n = fs.len();
    let mut first = Matrix::zeros(n, split);
    let mut rest = Matrix::zeros(n, d - split);
    for i in 0..n {
        let row = fs.sample(i);
        first.row_mut(i).copy_from_slice(&row[..split]);
        rest.row_mut(i).copy_from_slice(&row[split..]);
    }
    let a = FeatureSet::new(first, fs.labels.clone(), fs.class_count)?;
    let b = FeatureSet::new(rest, fs.labels.clone(), fs.class_count)?;
    Ok((a, b))
}
