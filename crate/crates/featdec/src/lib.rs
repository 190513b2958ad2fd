//! Out-of-distribution scoring on decomposed feature representations.
//!
//! The pipeline: fit Gaussian density models to labeled feature vectors,
//! split the feature space into a discriminative part `z_d` and a
//! non-discriminative part `z_n` (fixed split, PCA, or an adversarially
//! trained invertible residual map), score each part with a
//! Mahalanobis-family model, and combine or compare the per-part scores.
//! A k-nearest-neighbor KL estimator turns score distributions into a
//! dataset-distance diagnostic.
//!
//! Modules:
//! - [`numkit`] — dense linear algebra, Cholesky/eigen/power-iteration
//!   kernels, seeded Gaussian sampling.
//! - [`featstore`] — the [`featstore::FeatureSet`] data model, bit-exact
//!   persistence (ODF1 binary and CSV), and the synthetic 2-D / 128-D
//!   benchmark generators.
//! - [`density`] — shared-covariance Mahalanobis, per-class GDA, marginal
//!   and relative scoring.
//! - [`decomp`] — PCA and iCE (invertible residual network + adversarial
//!   linear probe) decompositions.
//! - [`metrics`] — AUROC, score normalization and combination, kNN KL
//!   divergence, dataset distances, class-wise reports, histograms.

pub mod decomp;
pub mod density;
pub mod featstore;
pub mod metrics;
pub mod numkit;

/// Default seed for generators and training; the bundled benchmark
/// reproductions are pinned to it.
pub const DEFAULT_SEED: u64 = 9;
