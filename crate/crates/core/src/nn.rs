//! Minimal dense feedforward networks with manual backpropagation.
//!
//! Batches are stored column-wise: an input batch is `in_dim × batch`.
//! Hidden layers use `tanh`; the output layer is linear, with softmax
//! applied by callers that need probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};

/// One affine layer `y = W x + b`, `W` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vector,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(output, input),
            bias: Vector::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations recorded by [`Mlp::forward_trace`]: `activations[l]` is the input
/// to layer `l`; the last entry is the network output.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Matrix>,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("trace is never empty")
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Dense {
                    weight: Matrix::from_fn(w[1], w[0], |_, _| rng.random_range(-limit..limit)),
                    bias: Vector::zeros(w[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].input_dim()];
        s.extend(self.layers.iter().map(Dense::output_dim));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Dense::output_dim).unwrap_or(0)
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let last = self.layers.len() - 1;
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            a = affine(layer, &a);
            if l < last {
                a.apply(|v| *v = v.tanh());
            }
        }
        a
    }

    pub fn forward_one(&self, x: &Vector) -> Vector {
        let out = self.forward(&Matrix::from_column_slice(x.len(), 1, x.as_slice()));
        out.column(0).into_owned()
    }

    pub fn forward_trace(&self, x: &Matrix) -> Trace {
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut a = affine(layer, activations.last().unwrap());
            if l < last {
                a.apply(|v| *v = v.tanh());
            }
            activations.push(a);
        }
        Trace { activations }
    }

    /// Gradients of a scalar loss given `∂L/∂output` (same shape as the
    /// output batch). Returns parameter gradients and `∂L/∂input`.
    pub fn backward(&self, trace: &Trace, grad_out: &Matrix) -> (Mlp, Matrix) {
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        for l in (0..self.layers.len()).rev() {
            if l < last {
                // tanh' = 1 − tanh²
                delta.zip_apply(&trace.activations[l + 1], |d, a| *d *= 1.0 - a * a);
            }
            let input = &trace.activations[l];
            let weight = &delta * input.transpose();
            let bias = delta.column_sum();
            grads.push(Dense { weight, bias });
            delta = self.layers[l].weight.transpose() * &delta;
        }
        grads.reverse();
        (Mlp { layers: grads }, delta)
    }

    /// `θ ← θ − lr·g`.
    pub fn sgd_step(&mut self, grads: &Mlp, lr: f64) {
        for (p, g) in self.layers.iter_mut().zip(&grads.layers) {
            p.weight.zip_apply(&g.weight, |w, d| *w -= lr * d);
            p.bias.axpy(-lr, &g.bias, 1.0);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weight *= c;
            l.bias *= c;
        }
    }

    pub fn add_scaled(&mut self, other: &Mlp, c: f64) {
        for (p, g) in self.layers.iter_mut().zip(&other.layers) {
            p.weight.zip_apply(&g.weight, |w, d| *w += c * d);
            p.bias.axpy(c, &g.bias, 1.0);
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.transpose().iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "parameter count mismatch");
        let mut off = 0;
        for l in &mut self.layers {
            let (r, c) = l.weight.shape();
            l.weight = Matrix::from_row_slice(r, c, &flat[off..off + r * c]);
            off += r * c;
            l.bias = Vector::from_column_slice(&flat[off..off + r]);
            off += r;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

fn affine(layer: &Dense, x: &Matrix) -> Matrix {
    let mut y = &layer.weight * x;
    for mut col in y.column_iter_mut() {
        col += &layer.bias;
    }
    y
}

/// Column-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for mut col in out.column_iter_mut() {
        let max = col.max();
        col.apply(|v| *v = (*v - max).exp());
        let sum = col.sum();
        col /= sum;
    }
    out
}

pub fn softmax_vec(logits: &Vector) -> Vector {
    let max = logits.max();
    let e = logits.map(|v| (v - max).exp());
    let s = e.sum();
    e / s
}

/// Mean cross-entropy of column-wise probabilities against class labels.
pub fn cross_entropy(probs: &Matrix, labels: &[usize]) -> f64 {
    assert_eq!(probs.ncols(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(j, &k)| -probs[(k, j)].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / labels.len() as f64
}

/// Gradient of [`cross_entropy`] (mean over the batch) with respect to the
/// logits: `(softmax − onehot) / batch`.
pub fn cross_entropy_logit_grad(probs: &Matrix, labels: &[usize]) -> Matrix {
    let mut g = probs.clone();
    for (j, &k) in labels.iter().enumerate() {
        g[(k, j)] -= 1.0;
    }
    g / labels.len().max(1) as f64
}

pub fn argmax(col: &nalgebra::DVectorView<'_, f64>) -> usize {
    col.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Fraction of columns whose argmax equals the label.
pub fn accuracy(probs: &Matrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(j, &k)| argmax(&probs.column(*j)) == k)
        .count();
    hits as f64 / labels.len() as f64
}

/// Per-feature affine standardization `(x − center) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and standard deviation of each row of `data` (`dim × samples`).
    /// Near-constant features get unit scale.
    pub fn fit(data: &Matrix) -> Self {
        let n = data.ncols().max(1) as f64;
        let mut center = Vec::with_capacity(data.nrows());
        let mut scale = Vec::with_capacity(data.nrows());
        for row in data.row_iter() {
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            center.push(mean);
            scale.push(if sd > 1e-12 * (1.0 + mean.abs()) { sd } else { 1.0 });
        }
        Self { center, scale }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn apply(&self, data: &Matrix) -> Matrix {
        let mut out = data.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            let (c, s) = (self.center[i], self.scale[i]);
            row.apply(|v| *v = (*v - c) / s);
        }
        out
    }

    pub fn apply_vec(&self, x: &Vector) -> Vector {
        Vector::from_iterator(
            x.len(),
            x.iter().enumerate().map(|(i, v)| (v - self.center[i]) / self.scale[i]),
        )
    }

    /// Divides each row of an input-space gradient by the scale, mapping
    /// `∂L/∂(standardized x)` to `∂L/∂x`.
    pub fn backprop(&self, grad: &Matrix) -> Matrix {
        let mut out = grad.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row /= self.scale[i];
        }
        out
    }
}
