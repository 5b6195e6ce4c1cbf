//! Polynomial chaos expansion in orthonormal probabilists' Hermite polynomials.
//!
//! The basis over `R^d` is the tensor product of univariate polynomials
//! `psi_n(x) = He_n(x) / sqrt(n!)`, truncated to total degree `N`. Indices are
//! kept in graded lexicographic order, so the constant term is always first
//! and its coefficient is the mean of the expansion under `N(0, I)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{dot, Matrix};

/// Orthonormal probabilists' Hermite polynomial `He_n(x) / sqrt(n!)`.
pub fn hermite_orthonormal(n: usize, x: f64) -> f64 {
    let mut values = vec![0.0; n + 1];
    hermite_orthonormal_all(x, &mut values);
    values[n]
}

/// Fills `out[k] = psi_k(x)` for `k = 0..out.len()` using the normalized
/// three-term recurrence `psi_{k+1} = (x psi_k - sqrt(k) psi_{k-1}) / sqrt(k+1)`.
pub fn hermite_orthonormal_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Number of multi-indices in `d` variables with total degree at most `n`,
/// i.e. `(n + d)! / (n! d!)`.
pub fn basis_size(d: usize, n: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=d.min(n) as u128 {
        c = c * (n.max(d) as u128 + i) / i;
    }
    c as usize
}

/// All multi-indices of total degree `<= max_degree` in `d` variables,
/// graded lexicographic: by total degree, then with larger leading exponents
/// first (`(2,0), (1,1), (0,2)`).
pub fn enumerate_multi_indices(d: usize, max_degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(basis_size(d, max_degree));
    let mut current = vec![0; d];
    for total in 0..=max_degree {
        compositions(total, 0, &mut current, &mut out);
    }
    out
}

fn compositions(remaining: usize, pos: usize, current: &mut [usize], out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        return;
    }
    if current.is_empty() {
        out.push(MultiIndex(Vec::new()));
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        compositions(remaining - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PceBasis {
    latent_dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
}

impl PceBasis {
    pub fn new(latent_dim: usize, degree: usize) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::config("PCE latent dimension must be at least 1"));
        }
        Ok(Self {
            latent_dim,
            degree,
            indices: enumerate_multi_indices(latent_dim, degree),
        })
    }

    /// Rebuilds a basis from an explicit index list (e.g. a deserialized
    /// model), checking it matches the canonical enumeration.
    pub fn from_indices(latent_dim: usize, degree: usize, indices: Vec<MultiIndex>) -> Result<Self> {
        let basis = Self::new(latent_dim, degree)?;
        if basis.indices != indices {
            return Err(Error::config(format!(
                "index list does not match the graded-lexicographic total-degree basis (d={latent_dim}, N={degree})"
            )));
        }
        Ok(basis)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn size(&self) -> usize {
        self.indices.len()
    }

    /// Evaluates every basis function at `z`.
    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.size()];
        self.eval_into(z, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        if z.len() != self.latent_dim {
            return Err(Error::shape(format!(
                "basis has dimension {}, point has {}",
                self.latent_dim,
                z.len()
            )));
        }
        let stride = self.degree + 1;
        let mut univariate = vec![0.0; self.latent_dim * stride];
        for (k, &zk) in z.iter().enumerate() {
            hermite_orthonormal_all(zk, &mut univariate[k * stride..(k + 1) * stride]);
        }
        for (o, idx) in out.iter_mut().zip(&self.indices) {
            *o = idx
                .0
                .iter()
                .enumerate()
                .map(|(k, &e)| univariate[k * stride + e])
                .product();
        }
        Ok(())
    }

    /// Row `i` is the basis evaluated at row `i` of `points`.
    pub fn design_matrix(&self, points: &Matrix) -> Result<Matrix> {
        if points.cols() != self.latent_dim && points.rows() > 0 {
            return Err(Error::shape(format!(
                "basis has dimension {}, points have {} columns",
                self.latent_dim,
                points.cols()
            )));
        }
        let np = self.size();
        let mut design = Matrix::zeros(points.rows(), np);
        for i in 0..points.rows() {
            self.eval_into(points.row(i), &mut design.data_mut()[i * np..(i + 1) * np])?;
        }
        Ok(design)
    }
}

pub fn basis_eval(basis: &PceBasis, z: &[f64]) -> Result<Vec<f64>> {
    basis.eval(z)
}

pub fn design_matrix(basis: &PceBasis, points: &Matrix) -> Result<Matrix> {
    basis.design_matrix(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PceModelRepr", into = "PceModelRepr")]
pub struct PceModel {
    basis: PceBasis,
    coefficients: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PceModelRepr {
    latent_dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    coefficients: Vec<f64>,
}

impl TryFrom<PceModelRepr> for PceModel {
    type Error = Error;

    fn try_from(r: PceModelRepr) -> Result<Self> {
        let basis = PceBasis::from_indices(r.latent_dim, r.degree, r.indices)?;
        PceModel::new(basis, r.coefficients)
    }
}

impl From<PceModel> for PceModelRepr {
    fn from(m: PceModel) -> Self {
        PceModelRepr {
            latent_dim: m.basis.latent_dim,
            degree: m.basis.degree,
            indices: m.basis.indices,
            coefficients: m.coefficients,
        }
    }
}

impl PceModel {
    pub fn new(basis: PceBasis, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.size() {
            return Err(Error::shape(format!(
                "{} coefficients for a basis of size {}",
                coefficients.len(),
                basis.size()
            )));
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::numeric(format!("coefficient {i} is not finite")));
        }
        Ok(Self {
            basis,
            coefficients,
        })
    }

    pub fn basis(&self) -> &PceBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn latent_dim(&self) -> usize {
        self.basis.latent_dim
    }

    pub fn predict(&self, z: &[f64]) -> Result<f64> {
        Ok(dot(&self.coefficients, &self.basis.eval(z)?))
    }

    pub fn predict_many(&self, points: &Matrix) -> Result<Vec<f64>> {
        let design = self.basis.design_matrix(points)?;
        design.matvec(&self.coefficients)
    }
}

pub fn predict(model: &PceModel, z: &[f64]) -> Result<f64> {
    model.predict(z)
}

/// Least-squares coefficients minimizing `|y - design c|^2 + ridge |c|^2`.
///
/// Solved by Householder QR of the stacked system `[design; sqrt(ridge) I]`
/// rather than the normal equations.
pub fn ols_fit(design: &Matrix, y: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let (n, p) = (design.rows(), design.cols());
    if n == 0 {
        return Err(Error::data("least squares needs at least one row"));
    }
    if y.len() != n {
        return Err(Error::shape(format!("design has {n} rows, target has {}", y.len())));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::config(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    let extra = if ridge > 0.0 { p } else { 0 };
    let rows = n + extra;
    let sr = ridge.sqrt();
    let a = nalgebra::DMatrix::from_fn(rows, p, |i, j| {
        if i < n {
            design.get(i, j)
        } else if i - n == j {
            sr
        } else {
            0.0
        }
    });
    let b = nalgebra::DVector::from_fn(rows, |i, _| if i < n { y[i] } else { 0.0 });

    if rows < p {
        return Err(Error::numeric(format!(
            "least squares is underdetermined ({n} rows, {p} coefficients); use ridge > 0"
        )));
    }
    let qr = a.qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if let Some(i) = (0..p).find(|&i| r[(i, i)].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::numeric(format!(
            "normal equations are singular (column {i} is dependent); use ridge > 0"
        )));
    }
    let qtb = qr.q().transpose() * b;
    let c = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::numeric("triangular solve failed; use ridge > 0"))?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("least squares produced non-finite coefficients"));
    }
    Ok(c.iter().copied().collect())
}
