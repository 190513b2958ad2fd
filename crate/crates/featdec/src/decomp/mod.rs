//! Decomposition of features into a discriminative part `z_d` and a
//! non-discriminative part `z_n`.
//!
//! Three transforms share one interface: a fixed column split, PCA with a
//! split index, and an invertible residual network trained with the iCE
//! minimax objective (classify well from the first C output dimensions
//! while an adversarial linear probe fails to classify from the rest).

mod ice;
mod iresnet;
mod pca;
mod probe;

pub use ice::{ice_apply, ice_fit, ice_loss_and_grads, IceGrads, IceModel, TrainConfig, TrainLogEntry};
pub use iresnet::{IResNet, Layer};
pub use pca::{pca_apply, pca_fit, PcaTransform};
pub use probe::{fit_linear_probe, LinearProbe, ProbeConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featstore::{split_dims, FeatError, FeatureSet};
use crate::numkit::NumError;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("bad split index {split} for {dims} dimensions")]
    BadSplit { split: usize, dims: usize },

    #[error("feature dimension {actual} does not match transform dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(NumError),

    #[error("fixed-point inversion of layer {layer} did not converge in {iterations} iterations")]
    NoConvergence { layer: usize, iterations: usize },

    #[error("training data must be labeled with classes below {classes} (sample {sample} has {label})")]
    LabelOutOfRange {
        sample: usize,
        label: i32,
        classes: u32,
    },

    #[error("training diverged at iteration {iteration} (non-finite loss)")]
    Divergence { iteration: usize },

    #[error("training data needs more feature dimensions ({dims}) than classes ({classes})")]
    TooFewDims { dims: usize, classes: u32 },

    #[error(transparent)]
    Feat(#[from] FeatError),
}

pub type Result<T> = std::result::Result<T, DecompError>;

/// A fitted decomposition, serializable as a tagged document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transform {
    Pca(PcaTransform),
    Ice(IceModel),
    Split { dim: usize, split: usize },
}

impl Transform {
    /// Where `z_d` ends and `z_n` begins.
    pub fn split_index(&self) -> usize {
        match self {
            Transform::Pca(t) => t.split(),
            Transform::Ice(m) => m.split(),
            Transform::Split { split, .. } => *split,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Transform::Pca(t) => t.dim(),
            Transform::Ice(m) => m.dim(),
            Transform::Split { dim, .. } => *dim,
        }
    }

    /// Maps features to `(z_d, z_n)`; labels are preserved.
    pub fn apply(&self, fs: &FeatureSet) -> Result<(FeatureSet, FeatureSet)> {
        match self {
            Transform::Pca(t) => pca_apply(t, fs),
            Transform::Ice(m) => ice_apply(m, fs),
            Transform::Split { dim, split } => {
                if fs.dim() != *dim {
                    return Err(DecompError::DimensionMismatch {
                        expected: *dim,
                        actual: fs.dim(),
                    });
                }
                Ok(split_dims(fs, *split)?)
            }
        }
    }
}
