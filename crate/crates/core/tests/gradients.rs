//! Analytic gradients against central differences.

mod common;

use common::{elbo_case, mmd_case};
use pcenet::mmd::DEFAULT_SIGMA_GRID;

#[test]
fn elbo_gradient_matches_central_differences() {
    for seed in 0..12 {
        let err = elbo_case(seed);
        assert!(err < 1e-5, "network {seed}: rel error {err}");
    }
}

#[test]
fn mmd_gradient_matches_central_differences() {
    let mut seed = 0;
    for n in [2, 10, 50] {
        for np in [3, 10] {
            for &sigma in &DEFAULT_SIGMA_GRID {
                seed += 1;
                let err = mmd_case(n, np, sigma, seed);
                assert!(err < 1e-6, "n={n} np={np} sigma={sigma}: rel error {err}");
            }
        }
    }
}
