//! Surrogate modeling of high-dimensional input/output systems under uncertainty.
//!
//! Inputs are compressed by a Gaussian variational autoencoder into a latent
//! space whose prior is `N(0, I)`. A polynomial chaos expansion in orthonormal
//! probabilists' Hermite polynomials then maps latent samples to the response,
//! with coefficients fitted by minimizing a Gaussian-kernel squared maximum
//! mean discrepancy between the surrogate responses and the observed outputs.
//!
//! Module map:
//!
//! - [`nncore`]: dense layers, explicit backpropagation, Adam.
//! - [`data`]: CSV ingestion, min-max scaling, seeded splits.
//! - [`vae`]: encoder/decoder, ELBO and its gradient, training loop.
//! - [`pce`]: Hermite basis, multi-indices, design matrices, least squares.
//! - [`mmd`]: kernel loss, coefficient gradient, fitting, bandwidth selection.
//! - [`moments`]: Gauss-Hermite rules, conditional and global moments.
//! - [`metrics`]: generalization error, standardized residuals, histograms.
//! - [`pipeline`]: end-to-end training/evaluation and synthetic data.

pub mod data;
pub mod error;
pub mod metrics;
pub mod mmd;
pub mod moments;
pub mod nncore;
pub mod pce;
pub mod pipeline;
pub mod rng;
pub mod vae;

pub use error::{Error, Result};
