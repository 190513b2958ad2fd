//! Synthetic Gaussian benchmarks.
//!
//! Both generators produce four sets: labeled train and in-distribution
//! test data, plus two unlabeled OoD populations that deviate along the
//! discriminative respectively non-discriminative directions.
//!
//! The 2-D case: two in-distribution classes at (3, 0) and (-3, 0) with
//! per-coordinate standard deviation 0.5; OoD populations at (1.6, 0)
//! (discriminative shift) and (3, 1.4) (non-discriminative shift) with
//! standard deviation 0.3. Axis 0 is the discriminative direction.
//!
//! The 128-D case: ten classes with mean `10 e_c` (c = 1..10, one-based
//! basis indices) and identity covariance. Discriminative OoD draws a
//! per-sample k in {1..10} and centers at `5 e_k`; non-discriminative OoD
//! draws c in {1..10} and l in {11..128} and centers at `10 e_c + 5 e_l`.
//! The ground-truth split is at dimension 10.

use super::{FeatureSet, Result};
use crate::numkit::{Matrix, Rng};

/// Which benchmark to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyCase {
    Toy2d,
    Toy128,
}

/// Sample counts and seed for a toy benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToySpec {
    pub case: ToyCase,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub ood_per_set: usize,
    pub seed: u64,
}

impl ToySpec {
    pub fn toy2d(seed: u64) -> Self {
        ToySpec {
            case: ToyCase::Toy2d,
            train_per_class: 5000,
            test_per_class: 2000,
            ood_per_set: 2000,
            seed,
        }
    }

    pub fn toy128(seed: u64) -> Self {
        ToySpec {
            case: ToyCase::Toy128,
            train_per_class: 1000,
            test_per_class: 500,
            ood_per_set: 5000,
            seed,
        }
    }
}

/// The four generated populations.
#[derive(Debug, Clone)]
pub struct ToyData {
    pub train: FeatureSet,
    pub test_in: FeatureSet,
    pub ood_dis: FeatureSet,
    pub ood_nondis: FeatureSet,
}

// Each population draws from its own RNG stream so changing one count
// never shifts another population's samples.
const STREAM_TRAIN: u64 = 0;
const STREAM_TEST: u64 = 1;
const STREAM_OOD_DIS: u64 = 2;
const STREAM_OOD_NONDIS: u64 = 3;

const TOY2D_IN_SD: f64 = 0.5;
const TOY2D_OOD_SD: f64 = 0.3;

pub fn gen_toy2d(spec: &ToySpec) -> Result<ToyData> {
    assert_eq!(spec.case, ToyCase::Toy2d, "spec is not a toy2d spec");
    let means = [[3.0, 0.0], [-3.0, 0.0]];

    let labeled = |stream: u64, per_class: usize| -> Result<FeatureSet> {
        let mut rng = Rng::with_stream(spec.seed, stream);
        let mut m = Matrix::zeros(per_class * 2, 2);
        let mut labels = Vec::with_capacity(per_class * 2);
        for (c, mean) in means.iter().enumerate() {
            for i in 0..per_class {
                let row = m.row_mut(c * per_class + i);
                for (j, &mu) in mean.iter().enumerate() {
                    row[j] = mu + TOY2D_IN_SD * rng.next_standard_normal();
                }
                labels.push(c as i32);
            }
        }
        FeatureSet::new(m, labels, 2)
    };
    let ood = |stream: u64, mean: [f64; 2]| -> FeatureSet {
        let mut rng = Rng::with_stream(spec.seed, stream);
        let m = Matrix::from_fn(spec.ood_per_set, 2, |_, j| {
            mean[j] + TOY2D_OOD_SD * rng.next_standard_normal()
        });
        FeatureSet::unlabeled(m)
    };

    Ok(ToyData {
        train: labeled(STREAM_TRAIN, spec.train_per_class)?,
        test_in: labeled(STREAM_TEST, spec.test_per_class)?,
        ood_dis: ood(STREAM_OOD_DIS, [1.6, 0.0]),
        ood_nondis: ood(STREAM_OOD_NONDIS, [3.0, 1.4]),
    })
}

const TOY128_DIM: usize = 128;
const TOY128_CLASSES: usize = 10;

pub fn gen_toy128(spec: &ToySpec) -> Result<ToyData> {
    assert_eq!(spec.case, ToyCase::Toy128, "spec is not a toy128 spec");

    let labeled = |stream: u64, per_class: usize| -> Result<FeatureSet> {
        let mut rng = Rng::with_stream(spec.seed, stream);
        let n = per_class * TOY128_CLASSES;
        let mut m = Matrix::zeros(n, TOY128_DIM);
        let mut labels = Vec::with_capacity(n);
        for c in 0..TOY128_CLASSES {
            for i in 0..per_class {
                let row = m.row_mut(c * per_class + i);
                for v in row.iter_mut() {
                    *v = rng.next_standard_normal();
                }
                row[c] += 10.0;
                labels.push(c as i32);
            }
        }
        FeatureSet::new(m, labels, TOY128_CLASSES as u32)
    };

    let mut rng = Rng::with_stream(spec.seed, STREAM_OOD_DIS);
    let mut ood_dis = Matrix::zeros(spec.ood_per_set, TOY128_DIM);
    for i in 0..spec.ood_per_set {
        let k = rng.next_index(TOY128_CLASSES);
        let row = ood_dis.row_mut(i);
        for v in row.iter_mut() {
            *v = rng.next_standard_normal();
        }
        row[k] += 5.0;
    }

    let mut rng = Rng::with_stream(spec.seed, STREAM_OOD_NONDIS);
    let mut ood_nondis = Matrix::zeros(spec.ood_per_set, TOY128_DIM);
    for i in 0..spec.ood_per_set {
        let c = rng.next_index(TOY128_CLASSES);
        let l = TOY128_CLASSES + rng.next_index(TOY128_DIM - TOY128_CLASSES);
        let row = ood_nondis.row_mut(i);
        for v in row.iter_mut() {
            *v = rng.next_standard_normal();
        }
        row[c] += 10.0;
        row[l] += 5.0;
    }

    Ok(ToyData {
        train: labeled(STREAM_TRAIN, spec.train_per_class)?,
        test_in: labeled(STREAM_TEST, spec.test_per_class)?,
        ood_dis: FeatureSet::unlabeled(ood_dis),
        ood_nondis: FeatureSet::unlabeled(ood_nondis),
    })
}
