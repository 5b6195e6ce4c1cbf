//! Moments of a PCE response.
//!
//! Global moments come straight from the coefficients (orthonormal basis).
//! Conditional moments under one data point's latent posterior
//! `N(mu_i, diag(sigma_i^2))` are integrals of `P(z)^k`, computed either with
//! a tensorized Gauss-Hermite rule or by Monte Carlo.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{dot, Matrix};
use crate::pce::{hermite_orthonormal_all, PceModel};
use crate::rng::substream;
use crate::vae::LatentPosterior;

pub const MAX_POINTS_PER_DIM: usize = 32;
pub const MAX_RULE_NODES: usize = 1_000_000;
pub const MAX_MOMENT_ORDER: usize = 8;
/// Node budget under which the automatic method picks quadrature.
pub const AUTO_QUADRATURE_NODES: usize = 10_000;
pub const DEFAULT_MC_SAMPLES: usize = 1000;

/// Quadrature rule for the standard normal weight, normalized to total mass 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Matrix,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.cols()
    }
}

/// Univariate `q`-point Gauss-Hermite rule for `N(0, 1)`.
///
/// Nodes are eigenvalues of the Jacobi matrix of the probabilists' recurrence
/// (zero diagonal, off-diagonal `sqrt(k)`), polished by Newton steps on
/// `psi_q`. Weights use the Christoffel form `1 / sum_k psi_k(x)^2`.
pub fn gauss_hermite_1d(q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if q == 0 || q > MAX_POINTS_PER_DIM {
        return Err(Error::config(format!(
            "Gauss-Hermite points per dimension must be in 1..={MAX_POINTS_PER_DIM}, got {q}"
        )));
    }
    let jacobi = nalgebra::DMatrix::from_fn(q, q, |i, j| {
        if i + 1 == j {
            (j as f64).sqrt()
        } else if j + 1 == i {
            (i as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let mut psi = vec![0.0; q + 1];
    for x in &mut nodes {
        for _ in 0..3 {
            hermite_orthonormal_all(*x, &mut psi);
            let deriv = (q as f64).sqrt() * psi[q - 1];
            if deriv == 0.0 {
                break;
            }
            *x -= psi[q] / deriv;
        }
    }
    // Enforce exact symmetry about zero.
    for i in 0..q / 2 {
        let a = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[q - 1 - i] = a;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            hermite_orthonormal_all(x, &mut psi[..q]);
            1.0 / psi[..q].iter().map(|p| p * p).sum::<f64>()
        })
        .collect();
    for i in 0..q / 2 {
        let w = 0.5 * (weights[i] + weights[q - 1 - i]);
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok((nodes, weights))
}

/// `E[f(x)]`, `x ~ N(0, 1)`, under the `q`-point rule. Mirrored nodes are
/// summed in pairs, so odd integrands cancel exactly.
pub fn gauss_hermite_expectation(q: usize, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (x, w) = gauss_hermite_1d(q)?;
    let mut total = 0.0;
    for i in 0..q / 2 {
        total += w[i] * (f(x[i]) + f(x[q - 1 - i]));
    }
    if q % 2 == 1 {
        total += w[q / 2] * f(x[q / 2]);
    }
    Ok(total)
}

/// Tensor product of the `q`-point univariate rule over `d` dimensions.
pub fn gauss_hermite_rule(q: usize, d: usize) -> Result<QuadratureRule> {
    let count = (q as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if count > MAX_RULE_NODES as u128 {
        return Err(Error::config(format!(
            "{q}^{d} quadrature nodes exceed the budget of {MAX_RULE_NODES}; use monte_carlo"
        )));
    }
    let (x, w) = gauss_hermite_1d(q)?;
    let count = count as usize;
    let mut nodes = Matrix::zeros(count, d);
    let mut weights = vec![1.0; count];
    for n in 0..count {
        let mut rem = n;
        for k in (0..d).rev() {
            let j = rem % q;
            rem /= q;
            nodes.set(n, k, x[j]);
            weights[n] *= w[j];
        }
    }
    Ok(QuadratureRule { nodes, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentMethod {
    Quadrature { points_per_dim: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl MomentMethod {
    /// Quadrature with `degree + 1` points per dimension when the tensor
    /// grid has at most 10^4 nodes; otherwise 1000-sample Monte Carlo.
    pub fn auto(degree: usize, dim: usize, mc_seed: u64) -> Self {
        let q = degree + 1;
        let nodes = (q as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
        if nodes <= AUTO_QUADRATURE_NODES as u128 && q <= MAX_POINTS_PER_DIM {
            MomentMethod::Quadrature { points_per_dim: q }
        } else {
            MomentMethod::MonteCarlo {
                samples: DEFAULT_MC_SAMPLES,
                seed: mc_seed,
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MomentMethod::Quadrature { .. } => "quadrature",
            MomentMethod::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRequest {
    pub order: usize,
    pub method: MomentMethod,
}

impl MomentRequest {
    pub fn new(order: usize, method: MomentMethod) -> Result<Self> {
        if order == 0 || order > MAX_MOMENT_ORDER {
            return Err(Error::config(format!(
                "moment order must be in 1..={MAX_MOMENT_ORDER}, got {order}"
            )));
        }
        match method {
            MomentMethod::Quadrature { points_per_dim: 0 } => {
                Err(Error::config("quadrature needs at least one point per dimension"))
            }
            MomentMethod::MonteCarlo { samples: 0, .. } => {
                Err(Error::config("monte carlo needs at least one sample"))
            }
            _ => Ok(Self { order, method }),
        }
    }
}

/// A moment method prepared for one latent dimension, so the quadrature grid
/// is built once and reused across data points.
#[derive(Debug, Clone)]
pub struct MomentEngine {
    method: MomentMethod,
    dim: usize,
    rule: Option<QuadratureRule>,
}

impl MomentEngine {
    pub fn new(method: MomentMethod, dim: usize) -> Result<Self> {
        let rule = match method {
            MomentMethod::Quadrature { points_per_dim } => {
                Some(gauss_hermite_rule(points_per_dim, dim)?)
            }
            MomentMethod::MonteCarlo { samples: 0, .. } => {
                return Err(Error::config("monte carlo needs at least one sample"))
            }
            MomentMethod::MonteCarlo { .. } => None,
        };
        Ok(Self { method, dim, rule })
    }

    pub fn method(&self) -> MomentMethod {
        self.method
    }

    /// Evaluates `P` at the integration points for the posterior of data
    /// point `point_index`, returning `(values, weights)`.
    fn evaluate(
        &self,
        model: &PceModel,
        posterior: &LatentPosterior,
        point_index: u64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.dim;
        if posterior.dim() != d || model.latent_dim() != d {
            return Err(Error::shape(format!(
                "engine dimension {d}, posterior {}, model {}",
                posterior.dim(),
                model.latent_dim()
            )));
        }
        let std = posterior.std_dev();
        let basis = model.basis();
        let mut phi = vec![0.0; basis.size()];
        let mut z = vec![0.0; d];
        match (&self.rule, self.method) {
            (Some(rule), _) => {
                let mut values = Vec::with_capacity(rule.len());
                for n in 0..rule.len() {
                    for k in 0..d {
                        z[k] = posterior.mu[k] + std[k] * rule.nodes.get(n, k);
                    }
                    basis.eval_into(&z, &mut phi)?;
                    values.push(dot(model.coefficients(), &phi));
                }
                Ok((values, rule.weights.clone()))
            }
            (None, MomentMethod::MonteCarlo { samples, seed }) => {
                let mut rng = substream(seed, "mc-point", point_index);
                let mut values = Vec::with_capacity(samples);
                for _ in 0..samples {
                    for k in 0..d {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        z[k] = posterior.mu[k] + std[k] * e;
                    }
                    basis.eval_into(&z, &mut phi)?;
                    values.push(dot(model.coefficients(), &phi));
                }
                Ok((values, vec![1.0 / samples as f64; samples]))
            }
            (None, MomentMethod::Quadrature { .. }) => unreachable!("rule built in new"),
        }
    }

    /// Raw moment `E[P(z)^k]` under the posterior of point `point_index`.
    pub fn moment(
        &self,
        model: &PceModel,
        posterior: &LatentPosterior,
        order: usize,
        point_index: u64,
    ) -> Result<f64> {
        let (values, weights) = self.evaluate(model, posterior, point_index)?;
        Ok(values
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * v.powi(order as i32))
            .sum())
    }

    /// `(m1, m2 - m1^2)` from the same integration points, variance floored
    /// at zero.
    pub fn mean_var(
        &self,
        model: &PceModel,
        posterior: &LatentPosterior,
        point_index: u64,
    ) -> Result<(f64, f64)> {
        let (values, weights) = self.evaluate(model, posterior, point_index)?;
        let m1: f64 = values.iter().zip(&weights).map(|(v, w)| w * v).sum();
        let m2: f64 = values.iter().zip(&weights).map(|(v, w)| w * v * v).sum();
        Ok((m1, (m2 - m1 * m1).max(0.0)))
    }

    /// Conditional means and variances for a batch of posteriors. Point `i`
    /// uses Monte Carlo substream `i`.
    pub fn mean_var_all(
        &self,
        model: &PceModel,
        posteriors: &[LatentPosterior],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut means = Vec::with_capacity(posteriors.len());
        let mut vars = Vec::with_capacity(posteriors.len());
        for (i, p) in posteriors.iter().enumerate() {
            let (m, v) = self.mean_var(model, p, i as u64)?;
            means.push(m);
            vars.push(v);
        }
        Ok((means, vars))
    }
}

pub fn conditional_moment(
    model: &PceModel,
    posterior: &LatentPosterior,
    request: &MomentRequest,
) -> Result<f64> {
    let req = MomentRequest::new(request.order, request.method)?;
    MomentEngine::new(req.method, model.latent_dim())?.moment(model, posterior, req.order, 0)
}

pub fn conditional_mean_var(
    model: &PceModel,
    posterior: &LatentPosterior,
    method: MomentMethod,
) -> Result<(f64, f64)> {
    MomentEngine::new(method, model.latent_dim())?.mean_var(model, posterior, 0)
}

/// Mean and variance of `P(z)` for `z ~ N(0, I)`: the constant coefficient
/// and the sum of squares of all the others.
pub fn global_moments(model: &PceModel) -> (f64, f64) {
    let c = model.coefficients();
    let mean = c.first().copied().unwrap_or(0.0);
    let var = c.iter().skip(1).map(|v| v * v).sum();
    (mean, var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub point_index: usize,
    pub k: usize,
    pub method: String,
    pub value: f64,
}

pub fn write_moment_csv(path: impl AsRef<Path>, rows: &[MomentRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
