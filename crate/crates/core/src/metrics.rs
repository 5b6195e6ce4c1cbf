//! Test-set diagnostics: relative generalization error, standardized
//! residuals and their histogram.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmd::VARIANCE_FLOOR;

pub const DEFAULT_HISTOGRAM_BINS: usize = 30;
const MIN_BIN_WIDTH: f64 = 1e-12;

/// `sum (y_i - mean_i)^2 / sum (y_i - mean(y))^2`. Equals 1 for the constant
/// predictor `mean(y)`.
pub fn relative_generalization_error(y_true: &[f64], cond_means: &[f64]) -> Result<f64> {
    if y_true.len() != cond_means.len() {
        return Err(Error::shape(format!(
            "{} targets vs {} predictions",
            y_true.len(),
            cond_means.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::shape("generalization error needs at least one point"));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let denom: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::numeric(
            "all test targets are identical; relative error is undefined",
        ));
    }
    let num: f64 = y_true
        .iter()
        .zip(cond_means)
        .map(|(y, m)| (y - m).powi(2))
        .sum();
    Ok(num / denom)
}

/// `(y_i - mean_i) / sqrt(var_i)`, variances floored at 1e-12.
pub fn standardized_residuals(y_true: &[f64], cond_means: &[f64], cond_vars: &[f64]) -> Vec<f64> {
    y_true
        .iter()
        .zip(cond_means)
        .zip(cond_vars)
        .map(|((y, m), v)| (y - m) / v.max(VARIANCE_FLOOR).sqrt())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn integral(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(e.to_string()))?;
        w.write_record(["edge_low", "edge_high", "density"])
            .map_err(|e| Error::data(e.to_string()))?;
        for (d, e) in self.densities.iter().zip(self.edges.windows(2)) {
            w.write_record([e[0].to_string(), e[1].to_string(), d.to_string()])
                .map_err(|e| Error::data(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Equal-width bins over `[min, max]` normalized to unit area. A zero spread
/// is widened to 1e-12 total width.
pub fn histogram_density(values: &[f64], bin_count: usize) -> Result<Histogram> {
    if bin_count == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if values.is_empty() {
        return Err(Error::data("histogram of an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("histogram input contains non-finite values"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(MIN_BIN_WIDTH);
    let width = span / bin_count as f64;
    let edges: Vec<f64> = (0..=bin_count)
        .map(|k| if k == bin_count { lo + span } else { lo + k as f64 * width })
        .collect();
    let mut counts = vec![0usize; bin_count];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bin_count - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (n * (e[1] - e[0])))
        .collect();
    Ok(Histogram { edges, densities })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub epsilon_gen: f64,
    pub residuals: Vec<f64>,
    pub histogram: Histogram,
    pub trial_seed: u64,
    /// Fraction of standardized residuals in `[-1, 1]`.
    pub within_one_sd: f64,
}

impl EvalReport {
    pub fn new(
        y_true: &[f64],
        cond_means: &[f64],
        cond_vars: &[f64],
        bins: usize,
        trial_seed: u64,
    ) -> Result<Self> {
        if cond_vars.len() != y_true.len() {
            return Err(Error::shape("variances do not match targets"));
        }
        let epsilon_gen = relative_generalization_error(y_true, cond_means)?;
        let residuals = standardized_residuals(y_true, cond_means, cond_vars);
        let histogram = histogram_density(&residuals, bins)?;
        let within = residuals.iter().filter(|r| r.abs() <= 1.0).count() as f64 / residuals.len() as f64;
        Ok(Self {
            epsilon_gen,
            residuals,
            histogram,
            trial_seed,
            within_one_sd: within,
        })
    }
}

/// Linear-interpolation quantile of a sample (`q` in `[0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

impl ErrorSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        Some(Self {
            median: quantile(values, 0.5)?,
            q25: quantile(values, 0.25)?,
            q75: quantile(values, 0.75)?,
            min: quantile(values, 0.0)?,
            max: quantile(values, 1.0)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn generalization_error_examples() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(relative_generalization_error(&y, &y).unwrap(), 0.0);
        assert_eq!(relative_generalization_error(&y, &[2.0; 3]).unwrap(), 1.0);
        assert_eq!(relative_generalization_error(&y, &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert!(matches!(
            relative_generalization_error(&[4.0, 4.0], &[1.0, 2.0]),
            Err(Error::Numeric(_))
        ));
        assert!(relative_generalization_error(&[], &[]).is_err());
    }

    #[test]
    fn residual_examples() {
        assert_eq!(standardized_residuals(&[3.0], &[1.0], &[4.0]), vec![1.0]);
        assert_eq!(standardized_residuals(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 3.0]), vec![0.0, 0.0]);
        let a = standardized_residuals(&[3.0, -1.0], &[1.0, 0.5], &[4.0, 0.25]);
        let b = standardized_residuals(&[1.0, 0.5], &[3.0, -1.0], &[4.0, 0.25]);
        assert_eq!(a, b.iter().map(|v| -v).collect::<Vec<_>>());
    }

    #[test]
    fn histogram_examples() {
        let h = histogram_density(&[2.0; 5], 4).unwrap();
        let occupied: Vec<&f64> = h.densities.iter().filter(|d| **d > 0.0).collect();
        assert_eq!(occupied.len(), 1);
        assert!((h.integral() - 1.0).abs() < 1e-9);

        let mut rng = rng_from_seed(1);
        let v: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = histogram_density(&v, 50).unwrap();
        assert!((h.integral() - 1.0).abs() < 1e-9);
        assert!(h.densities.iter().all(|d| *d >= 0.0));
        let centre = h
            .edges
            .windows(2)
            .position(|e| e[0] <= 0.0 && 0.0 < e[1])
            .unwrap();
        assert!((h.densities[centre] - 0.398_942_28).abs() < 0.15 * 0.398_942_28);

        assert!(histogram_density(&[], 3).is_err());
        assert!(histogram_density(&[1.0], 0).is_err());
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&[], 0.5), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn error_shift_invariance(
                y in proptest::collection::vec(-100.0f64..100.0, 2..30),
                noise in proptest::collection::vec(-5.0f64..5.0, 30),
                shift in -1e3f64..1e3,
            ) {
                let m: Vec<f64> = y.iter().zip(&noise).map(|(a, b)| a + b).collect();
                prop_assume!(y.iter().any(|v| (v - y[0]).abs() > 1e-3));
                let e = relative_generalization_error(&y, &m).unwrap();
                let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
                let ms: Vec<f64> = m.iter().map(|v| v + shift).collect();
                let es = relative_generalization_error(&ys, &ms).unwrap();
                prop_assert!((e - es).abs() <= 1e-6 * e.max(1.0));

                let mean = y.iter().sum::<f64>() / y.len() as f64;
                let base = relative_generalization_error(&y, &vec![mean; y.len()]).unwrap();
                prop_assert!((base - 1.0).abs() < 1e-12);
            }

            #[test]
            fn residual_affine_invariance(
                y in proptest::collection::vec(-10.0f64..10.0, 1..20),
                a in 0.1f64..10.0,
                b in -10.0f64..10.0,
            ) {
                let m: Vec<f64> = y.iter().map(|v| 0.5 * v + 1.0).collect();
                let var: Vec<f64> = y.iter().map(|v| 0.5 + v.abs()).collect();
                let r = standardized_residuals(&y, &m, &var);
                let ya: Vec<f64> = y.iter().map(|v| a * v + b).collect();
                let ma: Vec<f64> = m.iter().map(|v| a * v + b).collect();
                let va: Vec<f64> = var.iter().map(|v| a * a * v).collect();
                let ra = standardized_residuals(&ya, &ma, &va);
                for (p, q) in r.iter().zip(&ra) {
                    prop_assert!((p - q).abs() <= 1e-9 * p.abs().max(1.0));
                }
            }

            #[test]
            fn histogram_normalized(v in proptest::collection::vec(-50.0f64..50.0, 1..200), bins in 1usize..60) {
                let h = histogram_density(&v, bins).unwrap();
                prop_assert!((h.integral() - 1.0).abs() < 1e-9);
                prop_assert!(h.densities.iter().all(|d| *d >= 0.0));
            }
        }
    }
}
