//! Invertible residual network with linear residual functions.
//!
//! Each layer maps `h -> h + W_eff h + b` where `W_eff = W min(1, kappa /
//! sigma(W))` and `sigma` is the spectral norm. With `kappa < 1` the
//! residual is a contraction, so every layer is invertible and the inverse
//! is computable by fixed-point iteration `x <- y - (W_eff x + b)`.
//!
//! Spectral norms come from power iteration warm-started on a cached
//! vector and run to convergence; after any weight update the caches are
//! refreshed, which keeps the effective norm within tolerance of the cap.

use serde::{Deserialize, Serialize};

use super::{DecompError, Result};
use crate::numkit::{spectral_norm_warm, Matrix};

const POWER_ITERS: usize = 300;
const POWER_TOL: f64 = 1e-12;

/// One residual layer plus its cached normalization state.
#[derive(Debug, Clone)]
pub struct Layer {
    weight: Matrix,
    bias: Vec<f64>,
    /// cached power-iteration vector, reused as next warm start
    pi_vector: Vec<f64>,
    sigma: f64,
    /// min(1, kappa / sigma); multiplies the raw weight everywhere
    scale: f64,
}

impl Layer {
    fn new(weight: Matrix, bias: Vec<f64>, kappa: f64) -> Self {
        let mut layer = Layer {
            weight,
            bias,
            pi_vector: Vec::new(),
            sigma: 0.0,
            scale: 1.0,
        };
        layer.refresh_norm(kappa);
        layer
    }

    fn refresh_norm(&mut self, kappa: f64) {
        let warm = if self.pi_vector.is_empty() {
            None
        } else {
            Some(self.pi_vector.as_slice())
        };
        let (sigma, v) = spectral_norm_warm(&self.weight, warm, POWER_ITERS, POWER_TOL);
        self.sigma = sigma;
        self.pi_vector = v;
        self.scale = if sigma > kappa { kappa / sigma } else { 1.0 };
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Raw spectral norm of the stored weight.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Clamp factor applied to the weight.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Spectral norm of the effective (clamped) weight.
    pub fn effective_sigma(&self) -> f64 {
        self.sigma * self.scale
    }

    /// Materializes `W_eff = scale * W`.
    pub fn effective_weight(&self) -> Matrix {
        let mut w = self.weight.clone();
        w.scale(self.scale);
        w
    }
}

/// Stack of residual layers under one spectral coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "IResNetDoc", into = "IResNetDoc")]
pub struct IResNet {
    layers: Vec<Layer>,
    kappa: f64,
}

/// Serialized form: raw weights and biases only; normalization caches are
/// rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct IResNetDoc {
    kappa: f64,
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerDoc {
    weight: Matrix,
    bias: Vec<f64>,
}

impl From<IResNetDoc> for IResNet {
    fn from(doc: IResNetDoc) -> Self {
        IResNet::from_parts(
            doc.layers.into_iter().map(|l| (l.weight, l.bias)).collect(),
            doc.kappa,
        )
    }
}

impl From<IResNet> for IResNetDoc {
    fn from(net: IResNet) -> Self {
        IResNetDoc {
            kappa: net.kappa,
            layers: net
                .layers
                .into_iter()
                .map(|l| LayerDoc {
                    weight: l.weight,
                    bias: l.bias,
                })
                .collect(),
        }
    }
}

impl IResNet {
    /// Builds a net from raw layer parameters; norms are computed here.
    pub fn from_parts(layers: Vec<(Matrix, Vec<f64>)>, kappa: f64) -> Self {
        let layers = layers
            .into_iter()
            .map(|(w, b)| {
                assert_eq!(w.rows(), w.cols(), "layer weights must be square");
                assert_eq!(w.rows(), b.len(), "bias length must match dimension");
                Layer::new(w, b, kappa)
            })
            .collect();
        IResNet { layers, kappa }
    }

    pub fn dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.rows())
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Applies a gradient step to every layer and refreshes the norms.
    pub fn sgd_step(&mut self, grads: &[(Matrix, Vec<f64>)], lr: f64) {
        assert_eq!(grads.len(), self.layers.len());
        for (layer, (dw, db)) in self.layers.iter_mut().zip(grads) {
            for (w, g) in layer.weight.data_mut().iter_mut().zip(dw.data()) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(db) {
                *b -= lr * g;
            }
        }
        self.refresh_norms();
    }

    pub fn refresh_norms(&mut self) {
        for layer in &mut self.layers {
            layer.refresh_norm(self.kappa);
        }
    }

    /// Forward pass of a single vector.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(DecompError::DimensionMismatch {
                expected: self.dim(),
                actual: z.len(),
            });
        }
        let mut h = z.to_vec();
        for layer in &self.layers {
            let wh = layer.weight.matvec(&h);
            for ((hv, wv), b) in h.iter_mut().zip(&wh).zip(&layer.bias) {
                *hv += layer.scale * wv + b;
            }
        }
        Ok(h)
    }

    /// Forward pass of a batch (rows = samples), keeping every intermediate
    /// activation: the result holds `h_0 = input` through `h_L`.
    pub fn forward_batch_trace(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        if x.cols() != self.dim() {
            return Err(DecompError::DimensionMismatch {
                expected: self.dim(),
                actual: x.cols(),
            });
        }
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(x.clone());
        for layer in &self.layers {
            let h = trace.last().unwrap();
            let mut wh = h.matmul_transb(&layer.weight);
            for i in 0..wh.rows() {
                let src = h.row(i);
                let row = wh.row_mut(i);
                for ((w, &hv), b) in row.iter_mut().zip(src).zip(&layer.bias) {
                    *w = hv + layer.scale * *w + b;
                }
            }
            trace.push(wh);
        }
        Ok(trace)
    }

    /// Batch forward without the trace.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_batch_trace(x)?.pop().unwrap())
    }

    /// Inverts the net by per-layer fixed-point iteration, last layer
    /// first. Stops each layer when the update shrinks below `tol` in the
    /// max norm; reports [`DecompError::NoConvergence`] if a layer fails to
    /// get there within `max_iters` (which signals a broken contraction).
    pub fn inverse(&self, y: &[f64], max_iters: usize, tol: f64) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(DecompError::DimensionMismatch {
                expected: self.dim(),
                actual: y.len(),
            });
        }
        let mut x = y.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let target = x.clone();
            let mut converged = false;
            for _ in 0..max_iters {
                let wx = layer.weight.matvec(&x);
                let mut delta = 0.0f64;
                for ((xv, &tv), (wv, bv)) in
                    x.iter_mut().zip(&target).zip(wx.iter().zip(&layer.bias))
                {
                    let next = tv - (layer.scale * wv + bv);
                    delta = delta.max((next - *xv).abs());
                    *xv = next;
                }
                if !delta.is_finite() {
                    break;
                }
                if delta < tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(DecompError::NoConvergence {
                    layer: idx,
                    iterations: max_iters,
                });
            }
        }
        Ok(x)
    }
}
