//! Gaussian-kernel squared MMD between PCE responses and observed outputs,
//! its gradient with respect to the PCE coefficients, and bandwidth
//! selection by cross-validation.
//!
//! The loss is the biased (V-statistic) estimator: all three double sums run
//! over every pair, diagonal included.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentEngine;
use crate::nncore::{AdamState, Matrix};
use crate::pce::{ols_fit, PceBasis, PceModel};
use crate::vae::LatentPosterior;

/// Bandwidth grid used when none is configured.
pub const DEFAULT_SIGMA_GRID: [f64; 7] = [0.01, 0.1, 1.0, 2.5, 5.0, 10.0, 100.0];
/// Lower bound on conditional variances in the CV loss.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    Zeros,
    Ols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmdFitConfig {
    pub sigma_grid: Vec<f64>,
    pub max_iterations: usize,
    pub step_size: f64,
    pub tolerance: f64,
    pub init: InitMethod,
    /// Ridge of the least-squares initializer.
    pub ols_ridge: f64,
}

impl Default for MmdFitConfig {
    fn default() -> Self {
        Self {
            sigma_grid: DEFAULT_SIGMA_GRID.to_vec(),
            max_iterations: 2000,
            step_size: 1e-2,
            tolerance: 1e-10,
            init: InitMethod::Ols,
            ols_ridge: 1e-10,
        }
    }
}

impl MmdFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_grid.is_empty() {
            return Err(Error::config("sigma grid is empty"));
        }
        if let Some(s) = self.sigma_grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::config(format!("sigma must be positive, got {s}")));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::config(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.ols_ridge >= 0.0) {
            return Err(Error::config(format!("ridge must be >= 0, got {}", self.ols_ridge)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaCv {
    pub sigma: f64,
    pub cv_loss: Option<f64>,
    pub final_mmd: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    /// MMD loss at every iterate, starting with the initializer.
    pub losses: Vec<f64>,
    pub best_iteration: usize,
    pub selected_sigma: Option<f64>,
    pub cv_table: Vec<SigmaCv>,
    pub converged: bool,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("kernel bandwidth must be positive, got {sigma}")));
    }
    Ok(())
}

/// `exp(-(y - y2)^2 / (2 sigma^2))`.
pub fn gaussian_kernel(y: f64, y2: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(kernel(y - y2, 0.5 / (sigma * sigma)))
}

#[inline]
fn kernel(diff: f64, gamma: f64) -> f64 {
    (-gamma * diff * diff).exp()
}

/// Sum over all ordered pairs `(i, j)` of `K(a_i, b_j)`.
fn kernel_sum(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    a.iter()
        .map(|&ai| b.iter().map(|&bj| kernel(ai - bj, gamma)).sum::<f64>())
        .sum()
}

/// Same as `kernel_sum(a, a, ..)`, using symmetry.
fn kernel_sum_self(a: &[f64], gamma: f64) -> f64 {
    let mut off = 0.0;
    for i in 0..a.len() {
        let mut row = 0.0;
        for j in i + 1..a.len() {
            row += kernel(a[i] - a[j], gamma);
        }
        off += row;
    }
    a.len() as f64 + 2.0 * off
}

pub fn mmd2_loss(y_pred: &[f64], y_true: &[f64], sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if y_pred.len() != y_true.len() {
        return Err(Error::shape(format!(
            "mmd: {} predictions vs {} targets",
            y_pred.len(),
            y_true.len()
        )));
    }
    if y_pred.is_empty() {
        return Err(Error::shape("mmd needs at least one sample"));
    }
    let gamma = 0.5 / (sigma * sigma);
    let n2 = (y_pred.len() * y_pred.len()) as f64;
    let pp = kernel_sum_self(y_pred, gamma);
    let tp = kernel_sum(y_true, y_pred, gamma);
    let tt = kernel_sum_self(y_true, gamma);
    Ok((pp - 2.0 * tp + tt) / n2)
}

/// Precomputed pieces for repeated loss/gradient evaluations on fixed data.
struct MmdObjective<'a> {
    design: &'a Matrix,
    y_true: &'a [f64],
    gamma: f64,
    inv_sigma2: f64,
    target_term: f64,
}

impl<'a> MmdObjective<'a> {
    fn new(design: &'a Matrix, y_true: &'a [f64], sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if design.rows() != y_true.len() {
            return Err(Error::shape(format!(
                "design has {} rows, target has {}",
                design.rows(),
                y_true.len()
            )));
        }
        if y_true.is_empty() {
            return Err(Error::shape("mmd needs at least one sample"));
        }
        let gamma = 0.5 / (sigma * sigma);
        Ok(Self {
            design,
            y_true,
            gamma,
            inv_sigma2: 1.0 / (sigma * sigma),
            target_term: kernel_sum_self(y_true, gamma),
        })
    }

    /// Loss and gradient at `coefficients`.
    ///
    /// The gradient is
    /// `-1/(n^2 s^2) [ 2 sum_ij K(y_i, yh_j)(y_i - yh_j) phi_k(z_j)
    ///               + sum_ij K(yh_i, yh_j)(yh_i - yh_j)(phi_k(z_i) - phi_k(z_j)) ]`.
    /// The second sum is antisymmetric in `(i, j)` apart from the phi factor,
    /// so it equals `2 sum_i phi_k(z_i) sum_j K(yh_i, yh_j)(yh_i - yh_j)`; both
    /// terms therefore reduce to a per-point weight `a_j` times `phi_k(z_j)`.
    fn loss_and_gradient(&self, coefficients: &[f64]) -> Result<(f64, Vec<f64>)> {
        let y_hat = self.design.matvec(coefficients)?;
        let n = y_hat.len();
        let mut weight = vec![0.0; n];
        let mut pp = n as f64;
        for i in 0..n {
            let mut row = 0.0;
            for j in i + 1..n {
                let diff = y_hat[i] - y_hat[j];
                let k = kernel(diff, self.gamma);
                row += k;
                let t = k * diff;
                weight[i] += 2.0 * t;
                weight[j] -= 2.0 * t;
            }
            pp += 2.0 * row;
        }
        let mut tp = 0.0;
        for (j, &yh) in y_hat.iter().enumerate() {
            let mut cross = 0.0;
            let mut row = 0.0;
            for &yt in self.y_true {
                let diff = yt - yh;
                let k = kernel(diff, self.gamma);
                row += k;
                cross += k * diff;
            }
            tp += row;
            weight[j] += 2.0 * cross;
        }
        let n2 = (n * n) as f64;
        let loss = (pp - 2.0 * tp + self.target_term) / n2;
        let scale = -self.inv_sigma2 / n2;
        for w in &mut weight {
            *w *= scale;
        }
        let grad = self.design.matvec_t(&weight)?;
        Ok((loss, grad))
    }
}

pub fn mmd2_gradient(
    coefficients: &[f64],
    design: &Matrix,
    y_true: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    if coefficients.len() != design.cols() {
        return Err(Error::shape(format!(
            "{} coefficients for a design with {} columns",
            coefficients.len(),
            design.cols()
        )));
    }
    Ok(MmdObjective::new(design, y_true, sigma)?
        .loss_and_gradient(coefficients)?
        .1)
}

/// Starting coefficients per `config.init`.
pub fn initial_coefficients(design: &Matrix, y_true: &[f64], config: &MmdFitConfig) -> Result<Vec<f64>> {
    match config.init {
        InitMethod::Zeros => Ok(vec![0.0; design.cols()]),
        InitMethod::Ols => ols_fit(design, y_true, config.ols_ridge),
    }
}

/// Adam on the squared MMD starting from `init`, stopping after
/// `max_iterations` updates or once the loss changes by less than
/// `tolerance`. Returns the iterate with the lowest loss seen.
pub fn fit_mmd_from(
    design: &Matrix,
    y_true: &[f64],
    sigma: f64,
    config: &MmdFitConfig,
    init: Vec<f64>,
) -> Result<(Vec<f64>, FitTrace)> {
    if design.rows() == 0 {
        return Err(Error::data("cannot fit on an empty design"));
    }
    if init.len() != design.cols() {
        return Err(Error::shape("initial coefficients do not match the design"));
    }
    let objective = MmdObjective::new(design, y_true, sigma)?;
    let mut adam = AdamState::new(init.len(), config.step_size);
    let mut coeffs = init;
    let mut best = coeffs.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_iteration = 0;
    let mut losses: Vec<f64> = Vec::new();
    let mut converged = false;

    for it in 0..=config.max_iterations {
        let (loss, grad) = objective.loss_and_gradient(&coeffs)?;
        if !loss.is_finite() {
            return Err(Error::numeric(format!("non-finite MMD loss at iteration {it}")));
        }
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&coeffs);
            best_iteration = it;
        }
        if let Some(&prev) = losses.last() {
            if (loss - prev).abs() < config.tolerance {
                losses.push(loss);
                converged = true;
                break;
            }
        }
        losses.push(loss);
        if it == config.max_iterations {
            break;
        }
        adam.step(&mut coeffs, &grad)
            .map_err(|e| Error::numeric(format!("MMD iteration {it}: {e}")))?;
    }
    Ok((
        best,
        FitTrace {
            losses,
            best_iteration,
            selected_sigma: Some(sigma),
            cv_table: Vec::new(),
            converged,
        },
    ))
}

pub fn fit_mmd(
    design: &Matrix,
    y_true: &[f64],
    sigma: f64,
    config: &MmdFitConfig,
) -> Result<(Vec<f64>, FitTrace)> {
    if design.rows() == 0 {
        return Err(Error::data("cannot fit on an empty design"));
    }
    let init = initial_coefficients(design, y_true, config)?;
    fit_mmd_from(design, y_true, sigma, config, init)
}

/// `sum_i (y_i - mean_i)^2 / var_i`, with variances floored at 1e-12.
pub fn cv_loss(y_val: &[f64], cond_means: &[f64], cond_vars: &[f64]) -> Result<f64> {
    if y_val.len() != cond_means.len() || y_val.len() != cond_vars.len() {
        return Err(Error::shape(format!(
            "cv loss: {} targets, {} means, {} variances",
            y_val.len(),
            cond_means.len(),
            cond_vars.len()
        )));
    }
    let mut total = 0.0;
    for (i, ((y, m), v)) in y_val.iter().zip(cond_means).zip(cond_vars).enumerate() {
        if !(*v >= 0.0) {
            return Err(Error::numeric(format!(
                "conditional variance of validation point {i} is {v}"
            )));
        }
        total += (y - m).powi(2) / v.max(VARIANCE_FLOOR);
    }
    Ok(total)
}

/// Index of the smallest loss; ties go to the smaller sigma, then to the
/// earlier entry. `None` entries are skipped.
pub fn argmin_sigma(table: &[(f64, Option<f64>)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &(sigma, loss)) in table.iter().enumerate() {
        let Some(loss) = loss else { continue };
        if loss.is_nan() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let (bs, bl) = (table[b].0, table[b].1.unwrap());
                if loss < bl || (loss == bl && sigma < bs) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Held-out points for bandwidth selection: their latent posteriors and
/// observed outputs.
pub struct Validation<'a> {
    pub posteriors: &'a [LatentPosterior],
    pub targets: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSelection {
    pub sigma: f64,
    pub coefficients: Vec<f64>,
    pub trace: FitTrace,
}

/// Fits one model per candidate bandwidth on the training design, scores
/// each with [`cv_loss`] on the validation posteriors, and returns the best.
/// Candidates are fitted in parallel; the result does not depend on
/// scheduling.
pub fn select_sigma(
    candidates: &[f64],
    basis: &PceBasis,
    train_design: &Matrix,
    train_targets: &[f64],
    validation: &Validation<'_>,
    engine: &MomentEngine,
    config: &MmdFitConfig,
) -> Result<SigmaSelection> {
    if candidates.is_empty() {
        return Err(Error::config("no sigma candidates"));
    }
    if validation.posteriors.len() != validation.targets.len() {
        return Err(Error::shape("validation posteriors and targets differ in length"));
    }
    let init = initial_coefficients(train_design, train_targets, config)?;

    let fits: Vec<Result<(Vec<f64>, FitTrace, f64)>> = candidates
        .par_iter()
        .map(|&sigma| {
            let (coeffs, trace) =
                fit_mmd_from(train_design, train_targets, sigma, config, init.clone())?;
            let model = PceModel::new(basis.clone(), coeffs.clone())?;
            let (means, vars) = engine.mean_var_all(&model, validation.posteriors)?;
            let loss = cv_loss(validation.targets, &means, &vars)?;
            if !loss.is_finite() {
                return Err(Error::numeric(format!("non-finite CV loss for sigma {sigma}")));
            }
            Ok((coeffs, trace, loss))
        })
        .collect();

    let mut table = Vec::with_capacity(candidates.len());
    for (&sigma, fit) in candidates.iter().zip(&fits) {
        table.push(match fit {
            Ok((_, trace, loss)) => SigmaCv {
                sigma,
                cv_loss: Some(*loss),
                final_mmd: trace.losses.get(trace.best_iteration).copied(),
                error: None,
            },
            Err(e) => SigmaCv {
                sigma,
                cv_loss: None,
                final_mmd: None,
                error: Some(e.to_string()),
            },
        });
    }
    let scores: Vec<(f64, Option<f64>)> = table.iter().map(|r| (r.sigma, r.cv_loss)).collect();
    let Some(best) = argmin_sigma(&scores) else {
        let details: Vec<String> = table
            .iter()
            .map(|r| format!("sigma={}: {}", r.sigma, r.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::numeric(format!(
            "every sigma candidate failed: {}",
            details.join("; ")
        )));
    };
    let (coefficients, mut trace, _) = fits
        .into_iter()
        .nth(best)
        .expect("index from table")
        .expect("best candidate succeeded");
    trace.selected_sigma = Some(candidates[best]);
    trace.cv_table = table;
    Ok(SigmaSelection {
        sigma: candidates[best],
        coefficients,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MomentMethod;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn kernel_examples() {
        assert_eq!(gaussian_kernel(1.7, 1.7, 0.3).unwrap(), 1.0);
        let k = gaussian_kernel(0.0, 2.0, 2f64.sqrt()).unwrap();
        assert!((k - (-1f64).exp()).abs() < 1e-15);
        let mut prev = 1.0;
        for d in [0.5, 1.0, 2.0, 4.0, 8.0, 40.0] {
            let k = gaussian_kernel(0.0, d, 1.0).unwrap();
            assert!(k < prev && k >= 0.0);
            prev = k;
        }
        assert!(matches!(gaussian_kernel(0.0, 1.0, 0.0), Err(Error::Config(_))));
        assert!(gaussian_kernel(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn loss_examples() {
        let y = [0.3, -1.0, 2.5, 0.0];
        assert!(mmd2_loss(&y, &y, 1.0).unwrap().abs() < 1e-12);
        assert!(mmd2_loss(&[0.0, 0.0], &[0.0, 0.0], 0.1).unwrap().abs() < 1e-12);

        // n = 1: K(0,0) - 2K(a,0) + K(a,a) = 2(1 - exp(-a^2/2))
        let l = mmd2_loss(&[0.0], &[1.0], 1.0).unwrap();
        assert!((l - 2.0 * (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((l - 0.7869).abs() < 1e-4);

        assert!(matches!(mmd2_loss(&[0.0], &[1.0, 2.0], 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_examples() {
        let design = Matrix::new(1, 2, vec![1.0, 0.4]).unwrap();
        let c = [1.0, 0.5];
        let y = [1.2];
        let g = mmd2_gradient(&c, &design, &y, 0.7).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_pair_term_ignores_constant_shift_in_phi() {
        // With y_true far away the cross term is ~0, leaving the pair term.
        let mut rng = rng_from_seed(2);
        let design = Matrix::from_fn(6, 3, |_, _| StandardNormal.sample(&mut rng));
        let c = [0.3, -0.8, 0.5];
        let far = [1e6; 6];
        let g = mmd2_gradient(&c, &design, &far, 1.0).unwrap();
        let shifted = Matrix::from_fn(6, 3, |i, j| design.get(i, j) + if j == 2 { 5.0 } else { 0.0 });
        // shifting column 2 changes y_hat; compensate by comparing only the
        // pair term evaluated with unchanged y_hat via a direct double sum
        let y_hat = design.matvec(&c).unwrap();
        let pair = |d: &Matrix, k: usize| {
            let mut s = 0.0;
            for i in 0..6 {
                for j in 0..6 {
                    let diff = y_hat[i] - y_hat[j];
                    s += (-0.5 * diff * diff).exp() * diff * (d.get(i, k) - d.get(j, k));
                }
            }
            -s / 36.0
        };
        for k in 0..3 {
            assert!((pair(&design, k) - pair(&shifted, k)).abs() < 1e-12);
            assert!((pair(&design, k) - g[k]).abs() < 1e-12);
        }
    }

    fn random_problem(n: usize, np: usize, seed: u64) -> (Matrix, Vec<f64>, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let design = Matrix::from_fn(n, np, |_, _| StandardNormal.sample(&mut rng));
        let c = (0..np).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        (design, c, y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (design, c, y) = random_problem(10, 6, 3);
        for sigma in [0.5, 1.0, 2.5] {
            let g = mmd2_gradient(&c, &design, &y, sigma).unwrap();
            let h = 1e-5;
            for k in 0..6 {
                let mut cp = c.clone();
                let mut cm = c.clone();
                cp[k] += h;
                cm[k] -= h;
                let lp = mmd2_loss(&design.matvec(&cp).unwrap(), &y, sigma).unwrap();
                let lm = mmd2_loss(&design.matvec(&cm).unwrap(), &y, sigma).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let rel = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-10);
                assert!(rel < 1e-6, "sigma={sigma} k={k}: {} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn fit_realizable_starts_exact() {
        let (design, c_star, _) = random_problem(60, 4, 4);
        let y = design.matvec(&c_star).unwrap();
        let config = MmdFitConfig::default();
        let (c, trace) = fit_mmd(&design, &y, 1.0, &config).unwrap();
        assert!(trace.losses[0] <= 1e-10);
        for (a, b) in c.iter().zip(&c_star) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_zero_iterations_returns_initializer() {
        let (design, _, y) = random_problem(20, 3, 5);
        let config = MmdFitConfig {
            max_iterations: 0,
            ..Default::default()
        };
        let (c, trace) = fit_mmd(&design, &y, 1.0, &config).unwrap();
        assert_eq!(c, ols_fit(&design, &y, config.ols_ridge).unwrap());
        assert_eq!(trace.losses.len(), 1);

        let zeros = MmdFitConfig {
            init: InitMethod::Zeros,
            ..config
        };
        assert_eq!(fit_mmd(&design, &y, 1.0, &zeros).unwrap().0, vec![0.0; 3]);
    }

    #[test]
    fn fit_never_ends_worse_than_it_started() {
        for seed in 0..4 {
            let (design, _, y) = random_problem(30, 4, 10 + seed);
            let config = MmdFitConfig {
                max_iterations: 200,
                init: InitMethod::Zeros,
                ..Default::default()
            };
            let (c, trace) = fit_mmd(&design, &y, 1.0, &config).unwrap();
            let final_loss = mmd2_loss(&design.matvec(&c).unwrap(), &y, 1.0).unwrap();
            assert!(final_loss <= trace.losses[0]);
            let recorded = trace.losses[trace.best_iteration];
            assert!((final_loss - recorded).abs() <= 1e-9 * recorded, "{final_loss} vs {recorded}");
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let (design, _, y) = random_problem(25, 3, 6);
        let config = MmdFitConfig {
            max_iterations: 100,
            ..Default::default()
        };
        assert_eq!(
            fit_mmd(&design, &y, 2.5, &config).unwrap(),
            fit_mmd(&design, &y, 2.5, &config).unwrap()
        );
    }

    #[test]
    fn cv_loss_examples() {
        let y = [1.0, 2.0, -3.0];
        assert_eq!(cv_loss(&y, &y, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(cv_loss(&[3.0], &[1.0], &[4.0]).unwrap(), 1.0);
        let v = [0.5, 1.5, 2.0];
        let m = [0.0, 0.0, 0.0];
        let a = cv_loss(&y, &m, &v).unwrap();
        let b = cv_loss(&y, &m, &v.map(|x| 2.0 * x)).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-12);
        assert!(matches!(cv_loss(&[1.0], &[0.0], &[-1.0]), Err(Error::Numeric(_))));
        assert_eq!(cv_loss(&[1.0], &[0.0], &[0.0]).unwrap(), 1e12);
    }

    #[test]
    fn argmin_rules() {
        assert_eq!(argmin_sigma(&[(2.5, Some(4.0))]), Some(0));
        assert_eq!(argmin_sigma(&[(0.1, Some(5.0)), (1.0, Some(3.0)), (2.5, Some(7.0))]), Some(1));
        assert_eq!(argmin_sigma(&[(1.0, Some(3.0)), (1.0, Some(3.0))]), Some(0));
        assert_eq!(argmin_sigma(&[(5.0, Some(3.0)), (1.0, Some(3.0))]), Some(1));
        assert_eq!(argmin_sigma(&[(1.0, None), (5.0, Some(9.0))]), Some(1));
        assert_eq!(argmin_sigma(&[(1.0, None)]), None);
    }

    #[test]
    fn select_sigma_singleton_and_table() {
        let mut rng = rng_from_seed(12);
        let basis = PceBasis::new(1, 2).unwrap();
        let z = Matrix::from_fn(40, 1, |_, _| StandardNormal.sample(&mut rng));
        let design = basis.design_matrix(&z).unwrap();
        let truth = [1.0, 0.5, 0.25];
        let y = design.matvec(&truth).unwrap();
        let val_post: Vec<LatentPosterior> = (0..5)
            .map(|i| LatentPosterior {
                mu: vec![i as f64 * 0.3 - 0.6],
                logvar: vec![-2.0],
            })
            .collect();
        let val_y: Vec<f64> = val_post
            .iter()
            .map(|p| PceModel::new(basis.clone(), truth.to_vec()).unwrap().predict(&p.mu).unwrap())
            .collect();
        let validation = Validation {
            posteriors: &val_post,
            targets: &val_y,
        };
        let engine = MomentEngine::new(MomentMethod::Quadrature { points_per_dim: 3 }, 1).unwrap();
        let config = MmdFitConfig {
            max_iterations: 50,
            ..Default::default()
        };
        let one = select_sigma(&[2.5], &basis, &design, &y, &validation, &engine, &config).unwrap();
        assert_eq!(one.sigma, 2.5);
        assert_eq!(one.trace.cv_table.len(), 1);

        let all = select_sigma(&DEFAULT_SIGMA_GRID, &basis, &design, &y, &validation, &engine, &config).unwrap();
        let best = all
            .trace
            .cv_table
            .iter()
            .filter_map(|r| r.cv_loss)
            .fold(f64::INFINITY, f64::min);
        let chosen = all.trace.cv_table.iter().find(|r| r.sigma == all.sigma).unwrap();
        assert_eq!(chosen.cv_loss, Some(best));
        assert!(select_sigma(&[], &basis, &design, &y, &validation, &engine, &config).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn loss_nonnegative_and_symmetric(
                a in proptest::collection::vec(-10.0f64..10.0, 1..20),
                seed in any::<u64>(),
                s in 0usize..7,
            ) {
                let mut rng = rng_from_seed(seed);
                let b: Vec<f64> = a.iter().map(|_| 3.0 * { let e: f64 = StandardNormal.sample(&mut rng); e }).collect();
                let sigma = DEFAULT_SIGMA_GRID[s];
                let l = mmd2_loss(&a, &b, sigma).unwrap();
                prop_assert!(l >= -1e-12);
                prop_assert!((l - mmd2_loss(&b, &a, sigma).unwrap()).abs() <= 1e-12);
                prop_assert!(mmd2_loss(&a, &a, sigma).unwrap().abs() < 1e-12);
            }
        }
    }
}
