//! Dense layers with hand-written backpropagation and the Adam optimizer.
//!
//! Everything here is `f64` and single-threaded; summation order is fixed so
//! that repeated runs are bit-identical.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "matrix entry ({}, {}) is not finite",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::shape(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Selects a subset of rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::shape(format!(
                "matvec: matrix has {} columns, vector has {} entries",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ * x`.
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::shape(format!(
                "transposed matvec: matrix has {} rows, vector has {} entries",
                self.rows,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Overflow-safe `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softplus,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(x),
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Gradients of a scalar objective with respect to one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub input: Vec<f64>,
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape(format!(
                "bias has {} entries but weights have {} rows",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(output_dim, input_dim),
            bias: vec![0.0; output_dim],
            activation,
        }
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init_uniform<R: Rng + ?Sized>(
        input_dim: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (input_dim.max(1) as f64).sqrt();
        let weights =
            Matrix::from_fn(output_dim, input_dim, |_, _| rng.random_range(-bound..=bound));
        let bias = (0..output_dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }

    pub fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.weights.matvec(x)?;
        for (ai, bi) in a.iter_mut().zip(&self.bias) {
            *ai += bi;
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.pre_activation(x)?;
        for v in &mut a {
            *v = self.activation.apply(*v);
        }
        Ok(a)
    }

    /// Backpropagates `upstream` (gradient w.r.t. this layer's output)
    /// through the layer evaluated at `input`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<LayerGrad> {
        if upstream.len() != self.output_dim() {
            return Err(Error::shape(format!(
                "upstream gradient has {} entries, layer output has {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let pre = self.pre_activation(input)?;
        let delta: Vec<f64> = pre
            .iter()
            .zip(upstream)
            .map(|(&a, &g)| g * self.activation.derivative(a))
            .collect();
        let weights = Matrix::from_fn(self.output_dim(), self.input_dim(), |i, j| {
            delta[i] * input[j]
        });
        let input_grad = self.weights.matvec_t(&delta)?;
        Ok(LayerGrad {
            input: input_grad,
            weights,
            bias: delta,
        })
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weights.data());
        out.extend_from_slice(&self.bias);
    }

    pub(crate) fn read_params(&mut self, flat: &[f64]) -> usize {
        let nw = self.weights.data().len();
        self.weights.data_mut().copy_from_slice(&flat[..nw]);
        let nb = self.bias.len();
        self.bias.copy_from_slice(&flat[nw..nw + nb]);
        nw + nb
    }
}

impl LayerGrad {
    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.weights.data());
        out.extend_from_slice(&self.bias);
    }
}

pub fn layer_forward(layer: &DenseLayer, x: &[f64]) -> Result<Vec<f64>> {
    layer.forward(x)
}

pub fn layer_backward(
    layer: &DenseLayer,
    cached_input: &[f64],
    upstream_grad: &[f64],
) -> Result<(Vec<f64>, Matrix, Vec<f64>)> {
    let g = layer.backward(cached_input, upstream_grad)?;
    Ok((g.input, g.weights, g.bias))
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(param_count: usize, step_size: f64) -> Self {
        Self {
            step_count: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One bias-corrected Adam step, in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::shape(format!(
                "adam: {} params, {} grads, state sized for {}",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::numeric(format!(
                "adam: gradient entry {i} is not finite ({})",
                grads[i]
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.step_size * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

pub fn adam_update(state: &mut AdamState, params: &[f64], grads: &[f64]) -> Result<Vec<f64>> {
    let mut out = params.to_vec();
    state.step(&mut out, grads)?;
    Ok(out)
}
