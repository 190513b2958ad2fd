//! Independent cross-entropy (iCE) decomposition.
//!
//! An invertible residual net `F` is trained so that the first `C` output
//! coordinates act as classification logits (`z_d`) while a linear probe
//! on the remaining coordinates (`z_n`) cannot recover the label. Two
//! objectives alternate:
//!
//! ```text
//! term1 = mean cross-entropy of softmax(F(z)[0..C]) against y
//! term2 = mean log-likelihood of the probe on F(z)[C..D]
//! theta (net)   descends term1 + term2
//! phi   (probe) descends -term2  (i.e. maximizes its own likelihood)
//! ```
//!
//! Driving term2 down makes `z_n` uninformative about the label while the
//! probe keeps tightening the bound from the other side.

use serde::{Deserialize, Serialize};

use super::iresnet::IResNet;
use super::probe::{argmax, checked_labels, softmax_ce_grad, LinearProbe};
use super::{DecompError, Result};
use crate::featstore::FeatureSet;
use crate::numkit::{Matrix, Rng};

/// Training settings for [`ice_fit`].
///
/// The probe must stay near-optimal for its gradient to mean anything, so
/// it takes several faster steps per net step; the net itself moves slowly
/// enough not to outrun the probe.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub layers: usize,
    /// spectral coefficient capping every residual layer
    pub kappa: f64,
    pub lr_theta: f64,
    pub lr_phi: f64,
    pub batch_size: usize,
    /// probe updates per net update
    pub probe_steps: usize,
    /// weights start uniform in +-(init_scale / sqrt(D))
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 3000,
            layers: 4,
            kappa: 0.9,
            lr_theta: 0.01,
            lr_phi: 0.1,
            batch_size: 128,
            probe_steps: 10,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

/// Invertible net plus the adversarial probe; the split index is the class
/// count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IceModel {
    net: IResNet,
    probe: LinearProbe,
    classes: u32,
    dim: usize,
    train_config: TrainConfig,
}

impl IceModel {
    /// Assembles a model from a net and probe; the probe must map the
    /// non-logit block `D - C` to `C` logits.
    pub fn from_parts(net: IResNet, probe: LinearProbe, classes: u32) -> Result<Self> {
        let dim = net.dim();
        if probe.input_dim() + classes as usize != dim || probe.classes() != classes as usize {
            return Err(DecompError::DimensionMismatch {
                expected: dim - classes as usize,
                actual: probe.input_dim(),
            });
        }
        Ok(IceModel {
            net,
            probe,
            classes,
            dim,
            train_config: TrainConfig {
                iterations: 0,
                ..TrainConfig::default()
            },
        })
    }

    pub fn net(&self) -> &IResNet {
        &self.net
    }

    pub fn probe(&self) -> &LinearProbe {
        &self.probe
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `z_d` is the first `classes` output coordinates.
    pub fn split(&self) -> usize {
        self.classes as usize
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    /// Fraction of labeled samples classified correctly by the first-C
    /// logits of the transformed features.
    pub fn head_accuracy(&self, fs: &FeatureSet) -> Result<f64> {
        let out = self.net.forward_batch(fs.features())?;
        let mut hits = 0usize;
        let mut total = 0usize;
        for i in 0..fs.len() {
            let label = fs.labels()[i];
            if label < 0 {
                continue;
            }
            if argmax(&out.row(i)[..self.split()]) == label as usize {
                hits += 1;
            }
            total += 1;
        }
        Ok(hits as f64 / total.max(1) as f64)
    }
}

/// Losses and exact gradients of both objectives on one labeled batch.
#[derive(Debug)]
pub struct IceGrads {
    pub loss_theta: f64,
    pub loss_phi: f64,
    pub term1: f64,
    pub term2: f64,
    /// per-layer (dW, db), outermost layer last
    pub grads_theta: Vec<(Matrix, Vec<f64>)>,
    pub grad_probe_weight: Matrix,
    pub grad_probe_bias: Vec<f64>,
}

/// Computes `term1 + term2` (theta objective), `-term2` (phi objective)
/// and their exact gradients on a labeled batch.
pub fn ice_loss_and_grads(model: &IceModel, batch: &FeatureSet) -> Result<IceGrads> {
    let labels = checked_labels(batch, model.classes)?;
    let split = model.split();
    let trace = model.net.forward_batch_trace(batch.features())?;
    let out = trace.last().unwrap();
    let n = out.rows();

    let (zd, zn) = split_cols(out, split);
    // term1: cross-entropy on the logit head
    let (term1, grad_zd) = softmax_ce_grad(&zd, &labels);
    // probe cross-entropy: term2 = -CE, loss_phi = CE
    let plogits = model.probe.logits_batch(&zn);
    let (probe_ce, grad_plogits) = softmax_ce_grad(&plogits, &labels);
    let term2 = -probe_ce;

    // theta gradient into the outputs: d(term1)/dzd and d(term2)/dzn;
    // d(term2)/dplogits = -d(CE)/dplogits
    let mut grad_zn = grad_plogits.matmul(model.probe.weight());
    grad_zn.scale(-1.0);
    let mut delta = join_cols(&grad_zd, &grad_zn);

    // phi gradient: loss_phi = probe_ce
    let grad_probe_weight = grad_plogits.transpose_matmul(&zn);
    let grad_probe_bias = (0..model.classes as usize)
        .map(|c| (0..n).map(|i| grad_plogits[(i, c)]).sum())
        .collect();

    // backprop through the residual stack; sigma is treated as a constant,
    // so d(h + s W h + b)/dW = s * delta h^T and d/dh = (I + s W)^T delta
    let mut grads_theta: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(model.net.depth());
    for (t, layer) in model.net.layers().iter().enumerate().rev() {
        let h = &trace[t];
        let mut dw = delta.transpose_matmul(h);
        dw.scale(layer.scale());
        let db: Vec<f64> = (0..model.dim)
            .map(|c| (0..n).map(|i| delta[(i, c)]).sum())
            .collect();
        grads_theta.push((dw, db));
        if t > 0 {
            let mut dprop = delta.matmul(layer.weight());
            dprop.scale(layer.scale());
            dprop.add_assign(&delta);
            delta = dprop;
        }
    }
    grads_theta.reverse();

    let loss_theta = term1 + term2;
    if !loss_theta.is_finite() || !probe_ce.is_finite() {
        return Err(DecompError::Divergence { iteration: 0 });
    }
    Ok(IceGrads {
        loss_theta,
        loss_phi: probe_ce,
        term1,
        term2,
        grads_theta,
        grad_probe_weight,
        grad_probe_bias,
    })
}

/// One entry of the training log, recorded every 100 iterations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub iteration: usize,
    pub loss_theta: f64,
    pub loss_phi: f64,
    /// batch accuracy of the logit head
    pub head_accuracy: f64,
    /// batch accuracy of the adversarial probe
    pub probe_accuracy: f64,
    /// largest effective spectral norm across layers
    pub max_effective_norm: f64,
}

/// Result of [`ice_fit`]: the fitted model and its training log.
#[derive(Debug, Clone)]
pub struct IceTraining {
    pub model: IceModel,
    pub log: Vec<TrainLogEntry>,
}

/// Trains the decomposition by alternating probe and net updates.
pub fn ice_fit(train: &FeatureSet, cfg: &TrainConfig) -> Result<IceTraining> {
    let classes = train.class_count();
    let dim = train.dim();
    if classes == 0 {
        return Err(DecompError::LabelOutOfRange {
            sample: 0,
            label: -1,
            classes: 0,
        });
    }
    if dim <= classes as usize {
        return Err(DecompError::TooFewDims { dims: dim, classes });
    }
    let labels = checked_labels(train, classes)?;
    let n = train.len();

    let mut rng = Rng::new(cfg.seed);
    let lim = cfg.init_scale / (dim as f64).sqrt();
    let layers = (0..cfg.layers)
        .map(|_| {
            let w = Matrix::from_fn(dim, dim, |_, _| rng.next_uniform(-lim, lim));
            (w, vec![0.0; dim])
        })
        .collect();
    let net = IResNet::from_parts(layers, cfg.kappa);
    let probe = LinearProbe::init(classes as usize, dim - classes as usize, lim, &mut rng);
    let mut model = IceModel {
        net,
        probe,
        classes,
        dim,
        train_config: *cfg,
    };

    let mut log = Vec::new();
    let batch_n = cfg.batch_size.min(n);
    let mut batch_x = Matrix::zeros(batch_n, dim);
    let mut batch_y = vec![0usize; batch_n];
    // the probe's fresh batches for one iteration, forwarded in one pass
    let mut probe_x = Matrix::zeros(batch_n * cfg.probe_steps, dim);
    let mut probe_y = vec![0usize; batch_n * cfg.probe_steps];
    let draw = |rng: &mut Rng, x: &mut Matrix, y: &mut [usize]| {
        for b in 0..y.len() {
            let i = rng.next_index(n);
            x.row_mut(b).copy_from_slice(train.sample(i));
            y[b] = labels[i];
        }
    };

    for iter in 0..cfg.iterations {
        // probe catches up: several sequential steps, each on its own
        // fresh batch (slices of one batched forward pass)
        if cfg.probe_steps > 0 {
            draw(&mut rng, &mut probe_x, &mut probe_y);
            let zn = split_cols(&model.net.forward_batch(&probe_x)?, model.split()).1;
            for step in 0..cfg.probe_steps {
                let rows = zn.row_block(step * batch_n, batch_n);
                let ys = &probe_y[step * batch_n..(step + 1) * batch_n];
                model.probe.sgd_step(&rows, ys, cfg.lr_phi);
            }
        }
        // one net step
        draw(&mut rng, &mut batch_x, &mut batch_y);
        let batch = FeatureSet::new(
            batch_x.clone(),
            batch_y.iter().map(|&y| y as i32).collect(),
            classes,
        )?;
        let grads = ice_loss_and_grads(&model, &batch).map_err(|e| match e {
            DecompError::Divergence { .. } => DecompError::Divergence { iteration: iter },
            other => other,
        })?;
        model.net.sgd_step(&grads.grads_theta, cfg.lr_theta);

        if iter % 100 == 0 {
            log.push(log_entry(&model, iter, &grads, &batch));
        }
    }
    Ok(IceTraining { model, log })
}

fn log_entry(
    model: &IceModel,
    iteration: usize,
    grads: &IceGrads,
    batch: &FeatureSet,
) -> TrainLogEntry {
    let out = model.net.forward_batch(batch.features()).expect("dims fixed");
    let (zd, zn) = split_cols(&out, model.split());
    let plogits = model.probe.logits_batch(&zn);
    let mut head_hits = 0usize;
    let mut probe_hits = 0usize;
    for i in 0..batch.len() {
        let y = batch.labels()[i] as usize;
        if argmax(zd.row(i)) == y {
            head_hits += 1;
        }
        if argmax(plogits.row(i)) == y {
            probe_hits += 1;
        }
    }
    let max_norm = model
        .net
        .layers()
        .iter()
        .map(|l| l.effective_sigma())
        .fold(0.0, f64::max);
    TrainLogEntry {
        iteration,
        loss_theta: grads.loss_theta,
        loss_phi: grads.loss_phi,
        head_accuracy: head_hits as f64 / batch.len() as f64,
        probe_accuracy: probe_hits as f64 / batch.len() as f64,
        max_effective_norm: max_norm,
    }
}

/// Pushes features through the net and splits at the class count; labels
/// are preserved.
pub fn ice_apply(model: &IceModel, fs: &FeatureSet) -> Result<(FeatureSet, FeatureSet)> {
    let out = model.net.forward_batch(fs.features())?;
    let (zd, zn) = split_cols(&out, model.split());
    let a = FeatureSet::new(zd, fs.labels().to_vec(), fs.class_count())?;
    let b = FeatureSet::new(zn, fs.labels().to_vec(), fs.class_count())?;
    Ok((a, b))
}

fn split_cols(m: &Matrix, split: usize) -> (Matrix, Matrix) {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a = Matrix::zeros(rows, split);
    let mut b = Matrix::zeros(rows, cols - split);
    for i in 0..rows {
        let row = m.row(i);
        a.row_mut(i).copy_from_slice(&row[..split]);
        b.row_mut(i).copy_from_slice(&row[split..]);
    }
    (a, b)
}

fn join_cols(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.rows(), b.rows());
    let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
    for i in 0..a.rows() {
        out.row_mut(i)[..a.cols()].copy_from_slice(a.row(i));
        out.row_mut(i)[a.cols()..].copy_from_slice(b.row(i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featstore::split_dims;

    fn labeled_set(n: usize, d: usize, c: u32, seed: u64) -> FeatureSet {
        let mut rng = Rng::new(seed);
        let m = Matrix::from_fn(n, d, |_, _| rng.next_standard_normal());
        let labels = (0..n).map(|_| rng.next_index(c as usize) as i32).collect();
        FeatureSet::new(m, labels, c).unwrap()
    }

    fn small_model(seed: u64, init_scale: f64) -> IceModel {
        let cfg = TrainConfig {
            iterations: 0,
            layers: 2,
            init_scale,
            seed,
            ..TrainConfig::default()
        };
        let train = labeled_set(32, 8, 3, seed);
        ice_fit(&train, &cfg).unwrap().model
    }

    #[test]
    fn uniform_logits_hit_the_log_c_baseline() {
        // zero inputs through a zero net and zero probe: both heads emit a
        // uniform softmax
        let mut rng = Rng::new(111);
        let labels = (0..16).map(|_| rng.next_index(3) as i32).collect();
        let train = FeatureSet::new(Matrix::zeros(16, 8), labels, 3).unwrap();
        let net = IResNet::from_parts(vec![(Matrix::zeros(8, 8), vec![0.0; 8]); 2], 0.9);
        let probe = LinearProbe::new(Matrix::zeros(3, 5), vec![0.0; 3]);
        let mut model = small_model(111, 0.1);
        model.net = net;
        model.probe = probe;
        let g = ice_loss_and_grads(&model, &train).unwrap();
        let log_c = 3.0f64.ln();
        assert!((g.term1 - log_c).abs() < 1e-12);
        assert!((g.term2 + log_c).abs() < 1e-12);
        assert!((g.loss_theta - 0.0).abs() < 1e-12);
        assert!((g.loss_phi - log_c).abs() < 1e-12);
    }

    #[test]
    fn confident_probe_drives_term2_to_zero() {
        // crank the probe weights along a label-revealing direction
        let mut rng = Rng::new(112);
        let mut m = Matrix::zeros(30, 8);
        let mut labels = Vec::new();
        for i in 0..30 {
            let c = i % 3;
            for v in m.row_mut(i).iter_mut() {
                *v = 0.01 * rng.next_standard_normal();
            }
            m.row_mut(i)[3 + c] = 5.0; // lives in the z_n block (split = 3)
            labels.push(c as i32);
        }
        let train = FeatureSet::new(m, labels, 3).unwrap();
        let mut model = small_model(112, 0.1);
        model.net = IResNet::from_parts(vec![(Matrix::zeros(8, 8), vec![0.0; 8]); 2], 0.9);
        // identity net, probe reads the revealing coordinates
        let mut pw = Matrix::zeros(3, 5);
        for c in 0..3 {
            pw[(c, c)] = 50.0;
        }
        model.probe = LinearProbe::new(pw, vec![0.0; 3]);
        let g = ice_loss_and_grads(&model, &train).unwrap();
        assert!(g.term2 > -1e-6, "term2 = {} should approach 0", g.term2);
        assert!(g.term2 <= 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        // spectral clamp inactive (small weights), so the loss is smooth
        let train = labeled_set(16, 8, 3, 113);
        let model = small_model(113, 0.1);
        for layer in model.net.layers() {
            assert!(layer.sigma() < 0.9, "clamp must stay inactive");
        }
        check_gradients(&model, &train, 1e-5, 1e-4);
    }

    pub(crate) fn check_gradients(model: &IceModel, batch: &FeatureSet, h: f64, tol: f64) {
        let g = ice_loss_and_grads(model, batch).unwrap();
        // theta coordinates
        for (t, (dw, db)) in g.grads_theta.iter().enumerate() {
            for r in 0..dw.rows() {
                for c in 0..dw.cols() {
                    let fd = fd_theta(model, batch, t, r, c, true, h);
                    assert_close(fd, dw[(r, c)], tol, &format!("dW[{t}][{r},{c}]"));
                }
            }
            for (idx, &dbv) in db.iter().enumerate() {
                let fd = fd_theta(model, batch, t, idx, 0, false, h);
                assert_close(fd, dbv, tol, &format!("db[{t}][{idx}]"));
            }
        }
        // phi coordinates
        for r in 0..g.grad_probe_weight.rows() {
            for c in 0..g.grad_probe_weight.cols() {
                let fd = fd_phi(model, batch, r, c, true, h);
                assert_close(fd, g.grad_probe_weight[(r, c)], tol, &format!("dP[{r},{c}]"));
            }
        }
        for (idx, &dbv) in g.grad_probe_bias.iter().enumerate() {
            let fd = fd_phi(model, batch, idx, 0, false, h);
            assert_close(fd, dbv, tol, &format!("dpb[{idx}]"));
        }
    }

    fn perturb_theta(model: &IceModel, layer: usize, r: usize, c: usize, weight: bool, eps: f64) -> IceModel {
        let mut m = model.clone();
        let mut parts: Vec<(Matrix, Vec<f64>)> = m
            .net
            .layers()
            .iter()
            .map(|l| (l.weight().clone(), l.bias().to_vec()))
            .collect();
        if weight {
            parts[layer].0[(r, c)] += eps;
        } else {
            parts[layer].1[r] += eps;
        }
        m.net = IResNet::from_parts(parts, model.net.kappa());
        m
    }

    fn fd_theta(model: &IceModel, batch: &FeatureSet, layer: usize, r: usize, c: usize, weight: bool, h: f64) -> f64 {
        let plus = perturb_theta(model, layer, r, c, weight, h);
        let minus = perturb_theta(model, layer, r, c, weight, -h);
        let lp = ice_loss_and_grads(&plus, batch).unwrap().loss_theta;
        let lm = ice_loss_and_grads(&minus, batch).unwrap().loss_theta;
        (lp - lm) / (2.0 * h)
    }

    fn fd_phi(model: &IceModel, batch: &FeatureSet, r: usize, c: usize, weight: bool, h: f64) -> f64 {
        let mut plus = model.clone();
        let mut minus = model.clone();
        let (mut wp, mut bp) = (model.probe.weight().clone(), model.probe.bias().to_vec());
        let (mut wm, mut bm) = (wp.clone(), bp.clone());
        if weight {
            wp[(r, c)] += h;
            wm[(r, c)] -= h;
        } else {
            bp[r] += h;
            bm[r] -= h;
        }
        plus.probe = LinearProbe::new(wp, bp);
        minus.probe = LinearProbe::new(wm, bm);
        let lp = ice_loss_and_grads(&plus, batch).unwrap().loss_phi;
        let lm = ice_loss_and_grads(&minus, batch).unwrap().loss_phi;
        (lp - lm) / (2.0 * h)
    }

    fn assert_close(fd: f64, analytic: f64, tol: f64, what: &str) {
        let denom = fd.abs().max(analytic.abs());
        if denom < 1e-5 {
            assert!(
                (fd - analytic).abs() < 1e-9,
                "{what}: fd {fd} vs analytic {analytic} (absolute)"
            );
        } else {
            assert!(
                (fd - analytic).abs() / denom < tol,
                "{what}: fd {fd} vs analytic {analytic} (relative)"
            );
        }
    }

    #[test]
    fn zero_iterations_returns_initialized_model() {
        let train = labeled_set(40, 8, 3, 114);
        let cfg = TrainConfig {
            iterations: 0,
            layers: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = ice_fit(&train, &cfg).unwrap();
        let b = ice_fit(&train, &cfg).unwrap();
        assert!(a.log.is_empty());
        for (la, lb) in a.model.net.layers().iter().zip(b.model.net.layers()) {
            assert_eq!(la.weight(), lb.weight());
        }
        assert_eq!(a.model.probe.weight(), b.model.probe.weight());
    }

    #[test]
    fn identity_net_apply_equals_split_dims() {
        let train = labeled_set(25, 8, 3, 115);
        let mut model = small_model(115, 0.1);
        model.net = IResNet::from_parts(vec![(Matrix::zeros(8, 8), vec![0.0; 8]); 2], 0.9);
        let (zd, zn) = ice_apply(&model, &train).unwrap();
        let (sd, sn) = split_dims(&train, 3).unwrap();
        assert_eq!(zd, sd);
        assert_eq!(zn, sn);
    }

    #[test]
    fn apply_concat_equals_forward() {
        let train = labeled_set(12, 8, 3, 116);
        let model = small_model(116, 0.5);
        let (zd, zn) = ice_apply(&model, &train).unwrap();
        for i in 0..train.len() {
            let full = model.net.forward(train.sample(i)).unwrap();
            let mut joined = zd.sample(i).to_vec();
            joined.extend_from_slice(zn.sample(i));
            assert_eq!(joined, full);
        }
    }

    #[test]
    fn needs_more_dims_than_classes() {
        let train = labeled_set(20, 3, 3, 117);
        assert!(matches!(
            ice_fit(&train, &TrainConfig::default()),
            Err(DecompError::TooFewDims { .. })
        ));
    }
}
