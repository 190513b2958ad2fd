//! Linear softmax probe: multinomial logistic regression trained by SGD.
//!
//! Used both as the adversary inside iCE training and as the independent
//! evaluator that checks how much label information a representation still
//! carries.

use serde::{Deserialize, Serialize};

use super::{DecompError, Result};
use crate::featstore::FeatureSet;
use crate::numkit::{Matrix, Rng};

/// Linear map from features to class logits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearProbe {
    /// classes x feature-dim
    weight: Matrix,
    bias: Vec<f64>,
}

impl LinearProbe {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Self {
        assert_eq!(weight.rows(), bias.len());
        LinearProbe { weight, bias }
    }

    /// Uniform init in `(-scale, scale)`, zero bias.
    pub fn init(classes: usize, dim: usize, scale: f64, rng: &mut Rng) -> Self {
        let weight = Matrix::from_fn(classes, dim, |_, _| rng.next_uniform(-scale, scale));
        LinearProbe {
            weight,
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.weight.matvec(x);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        out
    }

    /// Batch logits: one row per input row.
    pub fn logits_batch(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul_transb(&self.weight);
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        out
    }

    /// One SGD step minimizing cross-entropy on the batch; returns the
    /// mean cross-entropy before the step.
    pub fn sgd_step(&mut self, x: &Matrix, labels: &[usize], lr: f64) -> f64 {
        let logits = self.logits_batch(x);
        let (loss, grad) = softmax_ce_grad(&logits, labels);
        // dW = grad^T x, db = column sums of grad
        let dw = grad.transpose_matmul(x);
        for (w, g) in self.weight.data_mut().iter_mut().zip(dw.data()) {
            *w -= lr * g;
        }
        for (class, b) in self.bias.iter_mut().enumerate() {
            let g: f64 = (0..grad.rows()).map(|i| grad[(i, class)]).sum();
            *b -= lr * g;
        }
        loss
    }

    /// Fraction of labeled samples whose argmax logit matches the label.
    pub fn accuracy(&self, fs: &FeatureSet) -> f64 {
        let mut hits = 0usize;
        let mut total = 0usize;
        for i in 0..fs.len() {
            let label = fs.labels()[i];
            if label < 0 {
                continue;
            }
            let logits = self.logits(fs.sample(i));
            if argmax(&logits) == label as usize {
                hits += 1;
            }
            total += 1;
        }
        hits as f64 / total.max(1) as f64
    }
}

/// Mean cross-entropy of softmax logits against labels, and its gradient
/// with respect to the logits (already divided by the batch size).
pub(crate) fn softmax_ce_grad(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let batch = logits.rows();
    assert_eq!(batch, labels.len());
    let mut grad = logits.clone();
    let mut loss = 0.0;
    for i in 0..batch {
        let row = grad.row_mut(i);
        let log_probs = log_softmax_inplace(row);
        loss -= log_probs[labels[i]];
        // row now holds softmax probabilities
        row[labels[i]] -= 1.0;
        for v in row.iter_mut() {
            *v /= batch as f64;
        }
    }
    (loss / batch as f64, grad)
}

/// Turns a logit row into probabilities in place; returns the log-probs.
fn log_softmax_inplace(row: &mut [f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    let log_probs: Vec<f64> = row.iter().map(|v| v - log_sum).collect();
    for (v, lp) in row.iter_mut().zip(&log_probs) {
        *v = lp.exp();
    }
    log_probs
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Probe training settings; the defaults make a strong evaluation probe.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub iterations: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            iterations: 4000,
            lr: 0.05,
            batch_size: 256,
            seed: 1,
        }
    }
}

/// Trains a fresh probe on a labeled feature set.
pub fn fit_linear_probe(train: &FeatureSet, cfg: &ProbeConfig) -> Result<LinearProbe> {
    let classes = train.class_count();
    if classes == 0 {
        return Err(DecompError::LabelOutOfRange {
            sample: 0,
            label: -1,
            classes: 0,
        });
    }
    let labels = checked_labels(train, classes)?;
    let mut rng = Rng::new(cfg.seed);
    let mut probe = LinearProbe::new(
        Matrix::zeros(classes as usize, train.dim()),
        vec![0.0; classes as usize],
    );
    let n = train.len();
    let take = cfg.batch_size.min(n);
    let mut batch_x = Matrix::zeros(take, train.dim());
    let mut batch_y = vec![0usize; take];
    for _ in 0..cfg.iterations {
        for b in 0..take {
            let i = rng.next_index(n);
            batch_x.row_mut(b).copy_from_slice(train.sample(i));
            batch_y[b] = labels[i];
        }
        probe.sgd_step(&batch_x, &batch_y, cfg.lr);
    }
    Ok(probe)
}

pub(crate) fn checked_labels(fs: &FeatureSet, classes: u32) -> Result<Vec<usize>> {
    fs.labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l < 0 || l as u32 >= classes {
                Err(DecompError::LabelOutOfRange {
                    sample: i,
                    label: l,
                    classes,
                })
            } else {
                Ok(l as usize)
            }
        })
        .collect()
}
