//! Shared finite-difference checks.

use pcenet::mmd::{mmd2_gradient, mmd2_loss};
use pcenet::nncore::Matrix;
use pcenet::rng::rng_from_seed;
use pcenet::vae::{VaeConfig, VaeParams};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest coordinate error relative to the largest gradient entry.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Random network with m <= 6, h <= 5, d <= 3; returns the gradient error.
pub fn elbo_case(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let m = rng.random_range(2..=6);
    let d = rng.random_range(1..=(m - 1).min(3));
    let config = VaeConfig {
        input_dim: m,
        hidden_dim: rng.random_range(1..=5),
        latent_dim: d,
        learning_rate: 1e-3,
        epochs: 0,
        batch_size: None,
        seed,
        recon_weight: [1.0, 10.0][seed as usize % 2],
    };
    let mut params = VaeParams::init(&config).unwrap();
    let x: Vec<f64> = (0..m).map(|_| rng.random()).collect();
    let eps: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();

    let (_, grad) = params.elbo_gradient(&x, &eps).unwrap();
    let base = params.to_flat();
    let h = 1e-6;
    let mut numeric = vec![0.0; base.len()];
    for k in 0..base.len() {
        let mut p = base.clone();
        p[k] += h;
        params.set_flat(&p).unwrap();
        let lp = params.elbo_terms(&x, &eps).unwrap().total();
        p[k] -= 2.0 * h;
        params.set_flat(&p).unwrap();
        let lm = params.elbo_terms(&x, &eps).unwrap().total();
        numeric[k] = (lp - lm) / (2.0 * h);
    }
    rel_error(&grad, &numeric)
}

pub fn mmd_case(n: usize, np: usize, sigma: f64, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let design = Matrix::from_fn(n, np, |_, _| StandardNormal.sample(&mut rng));
    let c: Vec<f64> = (0..np)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            0.5 * e
        })
        .collect();
    // Targets within a few kernel widths of the predictions, otherwise every
    // kernel term underflows and there is no gradient to check.
    let y_hat = design.matvec(&c).unwrap();
    let y: Vec<f64> = y_hat
        .iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + sigma * e
        })
        .collect();
    let grad = mmd2_gradient(&c, &design, &y, sigma).unwrap();
    // Step proportional to the kernel width keeps truncation error uniform.
    let h = 1e-5 * sigma;
    let numeric: Vec<f64> = (0..np)
        .map(|k| {
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp[k] += h;
            cm[k] -= h;
            let lp = mmd2_loss(&design.matvec(&cp).unwrap(), &y, sigma).unwrap();
            let lm = mmd2_loss(&design.matvec(&cm).unwrap(), &y, sigma).unwrap();
            (lp - lm) / (2.0 * h)
        })
        .collect();
    rel_error(&grad, &numeric)
}
