//! AUROC via the Mann-Whitney U statistic with midrank tie handling.

use super::{MetricError, Result, ScoreVector};

/// Probability that a random in-distribution score exceeds a random OoD
/// score, with half credit for ties: `P(s_in > s_out) + P(s_in = s_out)/2`.
///
/// Computed from rank sums in `O((n+m) log(n+m))`; ties share their group's
/// average rank, which makes the result identical to brute-force pair
/// counting.
pub fn auroc(in_scores: &ScoreVector, out_scores: &ScoreVector) -> Result<f64> {
    if in_scores.is_empty() {
        return Err(MetricError::EmptyInput("in-distribution scores"));
    }
    if out_scores.is_empty() {
        return Err(MetricError::EmptyInput("out-of-distribution scores"));
    }
    if in_scores.higher_is_in_dist != out_scores.higher_is_in_dist {
        return Err(MetricError::OrientationMismatch);
    }
    let n = in_scores.len();
    let m = out_scores.len();
    // (score, is_in) sorted ascending
    let mut all: Vec<(f64, bool)> = Vec::with_capacity(n + m);
    all.extend(in_scores.values.iter().map(|&v| (v, true)));
    all.extend(out_scores.values.iter().map(|&v| (v, false)));
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rank_sum_in = 0.0f64;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // 1-based midrank of the tie group [i, j)
        let midrank = (i + 1 + j) as f64 / 2.0;
        let in_count = all[i..j].iter().filter(|e| e.1).count();
        rank_sum_in += midrank * in_count as f64;
        i = j;
    }
    let u = rank_sum_in - (n * (n + 1)) as f64 / 2.0;
    let mut a = u / (n as f64 * m as f64);
    if !in_scores.higher_is_in_dist {
        a = 1.0 - a;
    }
    Ok(a)
}

/// Direct pair counting in `O(n*m)`; the independent oracle for [`auroc`].
pub fn auroc_brute_force(in_scores: &ScoreVector, out_scores: &ScoreVector) -> Result<f64> {
    if in_scores.is_empty() {
        return Err(MetricError::EmptyInput("in-distribution scores"));
    }
    if out_scores.is_empty() {
        return Err(MetricError::EmptyInput("out-of-distribution scores"));
    }
    if in_scores.higher_is_in_dist != out_scores.higher_is_in_dist {
        return Err(MetricError::OrientationMismatch);
    }
    let mut wins = 0.0f64;
    for &a in &in_scores.values {
        for &b in &out_scores.values {
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    let mut r = wins / (in_scores.len() as f64 * out_scores.len() as f64);
    if !in_scores.higher_is_in_dist {
        r = 1.0 - r;
    }
    Ok(r)
}
