//! Evaluation: AUROC, score normalization and combination, kNN KL
//! divergence, dataset distances, class-wise reports, histogram data.

mod auroc;
mod knnkl;

pub use auroc::{auroc, auroc_brute_force};
pub use knnkl::{knn_kl, knn_kl_points};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("score orientations differ")]
    OrientationMismatch,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("training scores have zero variance")]
    ZeroVariance,

    #[error("need more than {k} samples, got {n}")]
    TooFewSamples { n: usize, k: usize },

    #[error("OoD class {0} has no samples")]
    EmptyClass(i32),

    #[error("score kinds differ: expected {expected:?}, got {actual:?}")]
    KindMismatch {
        expected: ScoreKind,
        actual: Option<ScoreKind>,
    },
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Which scorer produced a [`ScoreVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    SharedMaha,
    ClasswiseGda,
    Marginal,
    Relative,
    Combined,
}

/// Normalization statistics attached to a score vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-sample scores. All scorers in this crate orient scores so that
/// higher means more in-distribution; the flag travels with the data so
/// mixed-orientation comparisons are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub higher_is_in_dist: bool,
    pub stats: Option<NormStats>,
    pub kind: Option<ScoreKind>,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Self {
        ScoreVector {
            values,
            higher_is_in_dist: true,
            stats: None,
            kind: None,
        }
    }

    pub fn with_kind(values: Vec<f64>, kind: ScoreKind) -> Self {
        ScoreVector {
            values,
            higher_is_in_dist: true,
            stats: None,
            kind: Some(kind),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rows selected by index, keeping the metadata.
    pub fn select(&self, idx: &[usize]) -> ScoreVector {
        ScoreVector {
            values: idx.iter().map(|&i| self.values[i]).collect(),
            ..self.clone()
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Standardizes `s` by the mean and (population) standard deviation of
/// `train_scores`; the statistics are recorded on the output.
pub fn normalize_scores(s: &ScoreVector, train_scores: &ScoreVector) -> Result<ScoreVector> {
    if train_scores.is_empty() {
        return Err(MetricError::EmptyInput("train scores"));
    }
    let n = train_scores.len() as f64;
    let mean = train_scores.values.iter().sum::<f64>() / n;
    let var = train_scores
        .values
        .iter()
        .map(|v| (v - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(MetricError::ZeroVariance);
    }
    Ok(ScoreVector {
        values: s.values.iter().map(|v| (v - mean) / std).collect(),
        higher_is_in_dist: s.higher_is_in_dist,
        stats: Some(NormStats { mean, std }),
        kind: s.kind,
    })
}

/// Elementwise average of the two per-subspace scores.
pub fn combined_score(s_dis: &ScoreVector, s_nondis: &ScoreVector) -> Result<ScoreVector> {
    if s_dis.len() != s_nondis.len() {
        return Err(MetricError::LengthMismatch(s_dis.len(), s_nondis.len()));
    }
    if s_dis.higher_is_in_dist != s_nondis.higher_is_in_dist {
        return Err(MetricError::OrientationMismatch);
    }
    let values = s_dis
        .values
        .iter()
        .zip(&s_nondis.values)
        .map(|(a, b)| 0.5 * a + 0.5 * b)
        .collect();
    Ok(ScoreVector {
        values,
        higher_is_in_dist: s_dis.higher_is_in_dist,
        stats: None,
        kind: Some(ScoreKind::Combined),
    })
}

/// Combination with each side standardized by its training scores first,
/// which makes the two scales commensurate before averaging.
pub fn combined_score_normalized(
    s_dis: &ScoreVector,
    train_dis: &ScoreVector,
    s_nondis: &ScoreVector,
    train_nondis: &ScoreVector,
) -> Result<ScoreVector> {
    let a = normalize_scores(s_dis, train_dis)?;
    let b = normalize_scores(s_nondis, train_nondis)?;
    combined_score(&a, &b)
}

/// KL-based dataset distances on the two decomposed score channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub d_dis: f64,
    pub d_nondis: f64,
    pub k: usize,
    /// in-distribution sample count
    pub n: usize,
    /// out-of-distribution sample count
    pub m: usize,
}

/// Normalizes each score set by its training statistics, then estimates
/// `KL(in || out)` per channel on the 1-D normalized scores.
///
/// `clamp` truncates small negative estimates (the estimator is unbiased
/// only asymptotically) at zero.
#[allow(clippy::too_many_arguments)]
pub fn dataset_distance(
    train_dis: &ScoreVector,
    in_dis: &ScoreVector,
    out_dis: &ScoreVector,
    train_nondis: &ScoreVector,
    in_nondis: &ScoreVector,
    out_nondis: &ScoreVector,
    k: usize,
    clamp: bool,
) -> Result<DistanceReport> {
    let in_d = normalize_scores(in_dis, train_dis)?;
    let out_d = normalize_scores(out_dis, train_dis)?;
    let in_n = normalize_scores(in_nondis, train_nondis)?;
    let out_n = normalize_scores(out_nondis, train_nondis)?;
    let mut d_dis = knn_kl(&in_d.values, &out_d.values, k)?;
    let mut d_nondis = knn_kl(&in_n.values, &out_n.values, k)?;
    if clamp {
        d_dis = d_dis.max(0.0);
        d_nondis = d_nondis.max(0.0);
    }
    Ok(DistanceReport {
        d_dis,
        d_nondis,
        k,
        n: in_dis.len(),
        m: out_dis.len(),
    })
}

/// One row of the class-wise report: detection of a single OoD class
/// against the full in-distribution test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClasswiseRow {
    pub class: i32,
    pub samples: usize,
    pub dis_auroc: f64,
    pub nondis_auroc: f64,
    pub d_dis: f64,
    pub d_nondis: f64,
    /// mean normalized scores of the class, one per channel
    pub mean_norm_dis: f64,
    pub mean_norm_nondis: f64,
}

/// Per-class breakdown over a labeled OoD set. `out_labels` groups the OoD
/// score entries; every distinct label becomes one row, ordered by label.
#[allow(clippy::too_many_arguments)]
pub fn classwise_report(
    in_dis: &ScoreVector,
    in_nondis: &ScoreVector,
    train_dis: &ScoreVector,
    train_nondis: &ScoreVector,
    out_dis: &ScoreVector,
    out_nondis: &ScoreVector,
    out_labels: &[i32],
    k: usize,
    clamp: bool,
) -> Result<Vec<ClasswiseRow>> {
    if out_labels.len() != out_dis.len() {
        return Err(MetricError::LengthMismatch(out_labels.len(), out_dis.len()));
    }
    if out_dis.len() != out_nondis.len() {
        return Err(MetricError::LengthMismatch(out_dis.len(), out_nondis.len()));
    }
    let mut classes: Vec<i32> = out_labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut rows = Vec::with_capacity(classes.len());
    for class in classes {
        let idx: Vec<usize> = out_labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(MetricError::EmptyClass(class));
        }
        let cls_dis = out_dis.select(&idx);
        let cls_nondis = out_nondis.select(&idx);
        let report = dataset_distance(
            train_dis, in_dis, &cls_dis, train_nondis, in_nondis, &cls_nondis, k, clamp,
        )?;
        let norm_dis = normalize_scores(&cls_dis, train_dis)?;
        let norm_nondis = normalize_scores(&cls_nondis, train_nondis)?;
        rows.push(ClasswiseRow {
            class,
            samples: idx.len(),
            dis_auroc: auroc(in_dis, &cls_dis)?,
            nondis_auroc: auroc(in_nondis, &cls_nondis)?,
            d_dis: report.d_dis,
            d_nondis: report.d_nondis,
            mean_norm_dis: norm_dis.mean(),
            mean_norm_nondis: norm_nondis.mean(),
        });
    }
    Ok(rows)
}

/// Histogram with uniform bin edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges, ascending
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Bins `s` into `bins` uniform bins over `range` (defaults to the data
/// range). Values outside an explicit range land in the boundary bins, so
/// counts always sum to the sample count.
pub fn histogram(s: &ScoreVector, bins: usize, range: Option<(f64, f64)>) -> Histogram {
    assert!(bins >= 1, "at least one bin required");
    let (mut lo, mut hi) = range.unwrap_or_else(|| {
        let lo = s.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    if s.is_empty() || !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if lo == hi {
        // degenerate range: center a unit-wide window on the value
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in &s.values {
        let mut b = ((v - lo) / width) as isize;
        b = b.clamp(0, bins as isize - 1);
        counts[b as usize] += 1;
    }
    let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
    Histogram { edges, counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(values: &[f64]) -> ScoreVector {
        ScoreVector::new(values.to_vec())
    }

    #[test]
    fn normalize_self_gives_zero_mean_unit_std() {
        let t = sv(&[1.0, 2.0, 3.0, 4.0]);
        let out = normalize_scores(&t, &t).unwrap();
        let mean = out.mean();
        let var = out.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-10);
        assert!((var.sqrt() - 1.0).abs() < 1e-10);
        assert!(out.stats.is_some());
    }

    #[test]
    fn normalize_constant_train_rejected() {
        let t = sv(&[2.0, 2.0, 2.0]);
        assert!(matches!(
            normalize_scores(&sv(&[1.0]), &t),
            Err(MetricError::ZeroVariance)
        ));
    }

    #[test]
    fn normalize_affine_invariance() {
        let s = sv(&[0.3, -1.2, 4.5, 2.2]);
        let t = sv(&[1.0, 0.5, -0.75, 2.25, 3.5]);
        let (a, b) = (2.5, -7.0);
        let s2 = sv(&s.values.iter().map(|v| a * v + b).collect::<Vec<_>>());
        let t2 = sv(&t.values.iter().map(|v| a * v + b).collect::<Vec<_>>());
        let x = normalize_scores(&s, &t).unwrap();
        let y = normalize_scores(&s2, &t2).unwrap();
        for (p, q) in x.values.iter().zip(&y.values) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn combined_identical_inputs_is_identity() {
        let s = sv(&[1.0, -2.0, 3.5]);
        let c = combined_score(&s, &s).unwrap();
        assert_eq!(c.values, s.values);
    }

    #[test]
    fn combined_is_arithmetic_mean() {
        let c = combined_score(&sv(&[0.0, 2.0]), &sv(&[4.0, 0.0])).unwrap();
        assert_eq!(c.values, vec![2.0, 1.0]);
    }

    #[test]
    fn combined_length_mismatch() {
        assert!(matches!(
            combined_score(&sv(&[1.0]), &sv(&[1.0, 2.0])),
            Err(MetricError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn histogram_single_bin_counts_everything() {
        let h = histogram(&sv(&[5.0; 7]), 1, None);
        assert_eq!(h.counts, vec![7]);
        assert_eq!(h.edges.len(), 2);
    }

    #[test]
    fn histogram_uniform_grid_one_per_bin() {
        let h = histogram(&sv(&[0.5, 1.5, 2.5, 3.5]), 4, Some((0.0, 4.0)));
        assert_eq!(h.counts, vec![1, 1, 1, 1]);
    }

    #[test]
    fn histogram_counts_conserved() {
        let s = sv(&[-3.0, 0.1, 0.2, 0.5, 9.0, 2.0, 2.0]);
        for bins in [1, 2, 3, 7, 20] {
            let h = histogram(&s, bins, None);
            assert_eq!(h.counts.iter().sum::<u64>(), 7);
            let h = histogram(&s, bins, Some((0.0, 1.0)));
            assert_eq!(h.counts.iter().sum::<u64>(), 7, "explicit range, {bins} bins");
        }
    }

    #[test]
    fn classwise_single_class_matches_aggregate() {
        let in_d = sv(&[3.0, 2.5, 2.0, 1.5]);
        let in_n = sv(&[1.0, 1.1, 0.9, 1.2]);
        let tr_d = sv(&[3.0, 2.0, 2.5, 3.5, 1.9]);
        let tr_n = sv(&[1.0, 1.2, 0.8, 1.1, 0.9]);
        let out_d = sv(&[0.5, 0.6, 0.4, 0.55]);
        let out_n = sv(&[0.2, 0.1, 0.3, 0.15]);
        let labels = vec![4, 4, 4, 4];
        let rows = classwise_report(
            &in_d, &in_n, &tr_d, &tr_n, &out_d, &out_n, &labels, 1, false,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].class, 4);
        assert_eq!(rows[0].samples, 4);
        assert_eq!(rows[0].dis_auroc, auroc(&in_d, &out_d).unwrap());
        assert_eq!(rows[0].nondis_auroc, auroc(&in_n, &out_n).unwrap());
    }

    #[test]
    fn classwise_row_per_distinct_label() {
        let in_d = sv(&[3.0, 2.5, 2.0, 1.5, 2.2]);
        let in_n = in_d.clone();
        let tr = sv(&[3.0, 2.0, 2.5, 3.5, 1.9]);
        let out = sv(&[0.5, 0.6, 0.4, 0.55, 0.7, 0.3]);
        let labels = vec![2, 0, 2, 0, 5, 5];
        let rows =
            classwise_report(&in_d, &in_n, &tr, &tr, &out, &out, &labels, 1, false).unwrap();
        let found: Vec<i32> = rows.iter().map(|r| r.class).collect();
        assert_eq!(found, vec![0, 2, 5]);
    }
}
