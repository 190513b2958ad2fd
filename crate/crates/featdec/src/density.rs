//! Gaussian density models over feature vectors.
//!
//! Three variants, differing in how much class information they use:
//!
//! - `shared_maha` — class-conditional Gaussians with one pooled covariance;
//!   the score of `z` is `max_c -(z - mu_c)^T S^{-1} (z - mu_c)`.
//! - `classwise_gda` — per-class covariances; the quadratic form gains the
//!   class log-partition term `-log((2 pi)^m det S_c)`.
//! - `marginal` — a single Gaussian fit to all samples, labels ignored.
//!
//! The relative score is the shared score minus the marginal score on the
//! same samples. All scores orient higher = more in-distribution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featstore::FeatureSet;
use crate::metrics::{ScoreKind, ScoreVector};
use crate::numkit::{cholesky_spd, Matrix, NumError, SpdFactor};

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("class {class} has {count} samples; need at least {needed}")]
    EmptyClass {
        class: u32,
        count: usize,
        needed: usize,
    },

    #[error("training data has no labels")]
    Unlabeled,

    #[error("covariance is singular even after regularization (epsilon = {epsilon:.3e})")]
    SingularCovariance { epsilon: f64 },

    #[error("feature dimension {actual} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("score vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),

    #[error("expected a {expected:?} score, got {actual:?}")]
    VariantMismatch {
        expected: ScoreKind,
        actual: Option<ScoreKind>,
    },

    #[error(transparent)]
    Num(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, DensityError>;

/// Density model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SharedMaha,
    ClasswiseGda,
    Marginal,
}

impl Variant {
    pub fn score_kind(self) -> ScoreKind {
        match self {
            Variant::SharedMaha => ScoreKind::SharedMaha,
            Variant::ClasswiseGda => ScoreKind::ClasswiseGda,
            Variant::Marginal => ScoreKind::Marginal,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Covariance {
    Shared(SpdFactor),
    Classwise(Vec<SpdFactor>),
}

/// Fitted Gaussian parameters producing scores `M(z)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityModel {
    variant: Variant,
    dim: usize,
    class_count: u32,
    /// regularization added to every covariance diagonal before factoring
    epsilon: f64,
    /// one mean for `marginal`, one per class otherwise
    means: Vec<Vec<f64>>,
    covariance: Covariance,
}

impl DensityModel {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn shared_factor(&self) -> Option<&SpdFactor> {
        match &self.covariance {
            Covariance::Shared(f) => Some(f),
            Covariance::Classwise(_) => None,
        }
    }
}

/// Fits a density model.
///
/// `epsilon` is added to every covariance diagonal before factoring;
/// `None` picks `1e-6` times the mean covariance diagonal. `shared_maha`
/// and `classwise_gda` require labels with at least two samples per class;
/// `marginal` also accepts unlabeled data.
pub fn fit(train: &FeatureSet, variant: Variant, epsilon: Option<f64>) -> Result<DensityModel> {
    let d = train.dim();
    let n = train.len();

    let (means, mut covs, class_count) = match variant {
        Variant::Marginal => {
            let mean = global_mean(train);
            let mut cov = Matrix::zeros(d, d);
            for i in 0..n {
                let centered = sub(train.sample(i), &mean);
                cov.rank_one_update(&centered, 1.0);
            }
            cov.scale(1.0 / n as f64);
            (vec![mean], vec![cov], train.class_count())
        }
        Variant::SharedMaha | Variant::ClasswiseGda => {
            let c = train.class_count();
            if c == 0 {
                return Err(DensityError::Unlabeled);
            }
            let mut means = Vec::with_capacity(c as usize);
            let mut class_idx = Vec::with_capacity(c as usize);
            for class in 0..c {
                let idx = train.class_indices(class);
                if idx.len() < 2 {
                    return Err(DensityError::EmptyClass {
                        class,
                        count: idx.len(),
                        needed: 2,
                    });
                }
                means.push(class_mean(train, &idx));
                class_idx.push(idx);
            }
            if variant == Variant::SharedMaha {
                // pooled within-class scatter over all N samples
                let mut cov = Matrix::zeros(d, d);
                for (mean, idx) in means.iter().zip(&class_idx) {
                    for &i in idx {
                        cov.rank_one_update(&sub(train.sample(i), mean), 1.0);
                    }
                }
                cov.scale(1.0 / n as f64);
                (means, vec![cov], c)
            } else {
                let covs = means
                    .iter()
                    .zip(&class_idx)
                    .map(|(mean, idx)| {
                        let mut cov = Matrix::zeros(d, d);
                        for &i in idx {
                            cov.rank_one_update(&sub(train.sample(i), mean), 1.0);
                        }
                        cov.scale(1.0 / idx.len() as f64);
                        cov
                    })
                    .collect();
                (means, covs, c)
            }
        }
    };

    // one epsilon for the whole model, scaled off the average variance
    let epsilon = epsilon.unwrap_or_else(|| {
        let diag_mean: f64 = covs
            .iter()
            .map(|cov| (0..d).map(|i| cov[(i, i)]).sum::<f64>() / d as f64)
            .sum::<f64>()
            / covs.len() as f64;
        1e-6 * diag_mean
    });
    for cov in &mut covs {
        for i in 0..d {
            cov[(i, i)] += epsilon;
        }
    }

    let factor = |cov: &Matrix| {
        cholesky_spd(cov).map_err(|e| match e {
            NumError::NotPositiveDefinite { .. } => DensityError::SingularCovariance { epsilon },
            other => DensityError::Num(other),
        })
    };
    let covariance = if variant == Variant::ClasswiseGda {
        Covariance::Classwise(covs.iter().map(&factor).collect::<Result<Vec<_>>>()?)
    } else {
        Covariance::Shared(factor(&covs[0])?)
    };

    Ok(DensityModel {
        variant,
        dim: d,
        class_count,
        epsilon,
        means,
        covariance,
    })
}

/// Scores every sample; higher = more in-distribution.
pub fn score(model: &DensityModel, fs: &FeatureSet) -> Result<ScoreVector> {
    if fs.dim() != model.dim {
        return Err(DensityError::DimensionMismatch {
            expected: model.dim,
            actual: fs.dim(),
        });
    }
    let values: Vec<f64> = (0..fs.len())
        .into_par_iter()
        .map(|i| score_one(model, fs.sample(i)))
        .collect();
    Ok(ScoreVector::with_kind(values, model.variant.score_kind()))
}

fn score_one(model: &DensityModel, z: &[f64]) -> f64 {
    match &model.covariance {
        Covariance::Shared(factor) => {
            // max over classes of the negated quadratic form
            let mut best = f64::NEG_INFINITY;
            for mean in &model.means {
                // forward-solve keeps the form a sum of squares (>= 0)
                let qf = factor.quadratic_form(&sub(z, mean)).expect("dims checked");
                best = best.max(-qf);
            }
            best
        }
        Covariance::Classwise(factors) => {
            let m = model.dim as f64;
            let log_2pi_m = m * (2.0 * std::f64::consts::PI).ln();
            let mut best = f64::NEG_INFINITY;
            for (mean, factor) in model.means.iter().zip(factors) {
                let qf = factor.quadratic_form(&sub(z, mean)).expect("dims checked");
                best = best.max(-qf - log_2pi_m - factor.log_det());
            }
            best
        }
    }
}

/// Relative score: shared-covariance score minus marginal score on the
/// same samples, preserving orientation.
pub fn relative_score(full: &ScoreVector, marg: &ScoreVector) -> Result<ScoreVector> {
    relative_from(full, ScoreKind::SharedMaha, marg)
}

/// Relative score with the class-wise GDA model as the full-score side.
pub fn relative_score_gda(full: &ScoreVector, marg: &ScoreVector) -> Result<ScoreVector> {
    relative_from(full, ScoreKind::ClasswiseGda, marg)
}

fn relative_from(
    full: &ScoreVector,
    expected_full: ScoreKind,
    marg: &ScoreVector,
) -> Result<ScoreVector> {
    if full.kind != Some(expected_full) {
        return Err(DensityError::VariantMismatch {
            expected: expected_full,
            actual: full.kind,
        });
    }
    if marg.kind != Some(ScoreKind::Marginal) {
        return Err(DensityError::VariantMismatch {
            expected: ScoreKind::Marginal,
            actual: marg.kind,
        });
    }
    if full.len() != marg.len() {
        return Err(DensityError::LengthMismatch(full.len(), marg.len()));
    }
    let values = full
        .values
        .iter()
        .zip(&marg.values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(ScoreVector::with_kind(values, ScoreKind::Relative))
}

fn global_mean(fs: &FeatureSet) -> Vec<f64> {
    let mut mean = vec![0.0; fs.dim()];
    for i in 0..fs.len() {
        for (m, v) in mean.iter_mut().zip(fs.sample(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= fs.len() as f64;
    }
    mean
}

fn class_mean(fs: &FeatureSet, idx: &[usize]) -> Vec<f64> {
    let mut mean = vec![0.0; fs.dim()];
    for &i in idx {
        for (m, v) in mean.iter_mut().zip(fs.sample(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= idx.len() as f64;
    }
    mean
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
