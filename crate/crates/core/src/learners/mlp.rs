//! One-hidden-layer ReLU network with a sigmoid output, trained by
//! full-batch gradient descent on binary cross-entropy.
//!
//! Full-batch updates make the trained weights a function of the training
//! multiset alone once rows are in canonical order.

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Standardize inputs with statistics of the training rows.
    pub standardize: bool,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 0.05,
            epochs: 300,
            standardize: true,
        }
    }
}

/// Network parameters. `w1` is `hidden x dim`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl MlpWeights {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            dim,
            hidden,
            w1: vec![0.0; dim * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// He-normal hidden layer, Glorot-scaled output layer, zero biases.
    pub fn init(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut w = Self::zeros(dim, hidden);
        let n1 = Normal::new(0.0, (2.0 / dim as f64).sqrt()).expect("valid std");
        let n2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("valid std");
        w.w1.iter_mut().for_each(|v| *v = n1.sample(rng));
        w.w2.iter_mut().for_each(|v| *v = n2.sample(rng));
        w
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn from_flat(dim: usize, hidden: usize, flat: &[f64]) -> Result<Self> {
        let mut w = Self::zeros(dim, hidden);
        if flat.len() != w.n_params() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                w.n_params(),
                flat.len()
            )));
        }
        let (a, rest) = flat.split_at(dim * hidden);
        let (b, rest) = rest.split_at(hidden);
        let (c, rest) = rest.split_at(hidden);
        w.w1.copy_from_slice(a);
        w.b1.copy_from_slice(b);
        w.w2.copy_from_slice(c);
        w.b2 = rest[0];
        Ok(w)
    }

    fn hidden_layer(&self, x: &[f64], pre: &mut [f64]) {
        for (j, p) in pre.iter_mut().enumerate() {
            let row = &self.w1[j * self.dim..(j + 1) * self.dim];
            *p = self.b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Pre-sigmoid output for an (already standardized) input.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut pre = vec![0.0; self.hidden];
        self.hidden_layer(x, &mut pre);
        self.b2 + pre.iter().zip(&self.w2).map(|(p, w)| p.max(0.0) * w).sum::<f64>()
    }

    /// Mean binary cross-entropy over `x`.
    pub fn loss(&self, x: &Matrix, y: &[u8]) -> f64 {
        let total: f64 = x
            .iter_rows()
            .zip(y)
            .map(|(row, &label)| {
                let z = self.logit(row);
                softplus(z) - label as f64 * z
            })
            .sum();
        total / x.rows() as f64
    }

    /// Mean binary cross-entropy and its gradient with respect to every
    /// parameter.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[u8]) -> (f64, MlpWeights) {
        let mut grad = Self::zeros(self.dim, self.hidden);
        let mut pre = vec![0.0; self.hidden];
        let mut loss = 0.0;
        for (row, &label) in x.iter_rows().zip(y) {
            self.hidden_layer(row, &mut pre);
            let z = self.b2 + pre.iter().zip(&self.w2).map(|(p, w)| p.max(0.0) * w).sum::<f64>();
            let t = label as f64;
            loss += softplus(z) - t * z;
            let dz = sigmoid(z) - t;
            grad.b2 += dz;
            for j in 0..self.hidden {
                if pre[j] <= 0.0 {
                    continue;
                }
                grad.w2[j] += dz * pre[j];
                let dpre = dz * self.w2[j];
                grad.b1[j] += dpre;
                let g = &mut grad.w1[j * self.dim..(j + 1) * self.dim];
                for (gv, xv) in g.iter_mut().zip(row) {
                    *gv += dpre * xv;
                }
            }
        }
        let n = x.rows() as f64;
        grad.scale(1.0 / n);
        (loss / n, grad)
    }

    fn scale(&mut self, s: f64) {
        self.w1.iter_mut().for_each(|v| *v *= s);
        self.b1.iter_mut().for_each(|v| *v *= s);
        self.w2.iter_mut().for_each(|v| *v *= s);
        self.b2 *= s;
    }

    fn add_scaled(&mut self, other: &MlpWeights, s: f64) {
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            *a += s * b;
        }
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += s * b;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += s * b;
        }
        self.b2 += s * other.b2;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    weights: MlpWeights,
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Mlp {
    /// Fit on rows already in canonical order.
    pub(crate) fn fit(x: &Matrix, y: &[u8], params: &MlpParams, seed: u64) -> Result<Self> {
        if params.hidden == 0 {
            return Err(invalid("network needs at least one hidden unit"));
        }
        if !(params.learning_rate > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        let d = x.cols();
        let (mean, inv_std) = if params.standardize {
            column_moments(x)
        } else {
            (vec![0.0; d], vec![1.0; d])
        };
        let mut xs = x.clone();
        for i in 0..xs.rows() {
            standardize(xs.row_mut(i), &mean, &inv_std);
        }
        let mut rng = seed::rng(seed, &[0]);
        let mut weights = MlpWeights::init(d, params.hidden, &mut rng);
        for _ in 0..params.epochs {
            let (_, grad) = weights.loss_and_gradient(&xs, y);
            weights.add_scaled(&grad, -params.learning_rate);
        }
        Ok(Self { weights, mean, inv_std })
    }

    pub fn weights(&self) -> &MlpWeights {
        &self.weights
    }

    pub fn predict(&self, z: &[f64]) -> f64 {
        let mut v = z.to_vec();
        standardize(&mut v, &self.mean, &self.inv_std);
        sigmoid(self.weights.logit(&v))
    }
}

fn column_moments(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (x.rows() as f64, x.cols());
    let mut mean = vec![0.0; d];
    for row in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in x.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let inv_std = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, inv_std)
}

#[inline]
fn standardize(row: &mut [f64], mean: &[f64], inv_std: &[f64]) {
    for ((v, m), s) in row.iter_mut().zip(mean).zip(inv_std) {
        *v = (*v - m) * s;
    }
}
