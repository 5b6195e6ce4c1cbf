//! Gaussian variational autoencoder with one hidden layer on each side.
//!
//! Encoder: `x -> softplus(W1 x + b1) -> (mu, logvar)`. Decoder:
//! `z -> softplus(W3 z + b3) -> sigmoid(W4 h + b4)`. The loss for one point
//! is the negative ELBO estimated with a single reparameterized sample:
//! `w * |x_hat - x|^2 + KL(q(z|x) || N(0, I))`, where `w` is the
//! reconstruction weight (1 by default).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nncore::{Activation, AdamState, DenseLayer, Matrix};
use crate::rng::{substream, StreamRng};

/// Encoder log-variances are clamped to `[-LOGVAR_CLAMP, LOGVAR_CLAMP]`.
pub const LOGVAR_CLAMP: f64 = 10.0;
pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Minibatch size; `None` means 32, or the full batch below 64 points.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_recon_weight")]
    pub recon_weight: f64,
}

fn default_recon_weight() -> f64 {
    1.0
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.latent_dim >= self.input_dim {
            return Err(Error::config(format!(
                "latent dimension must satisfy 1 <= d < m (d={}, m={})",
                self.latent_dim, self.input_dim
            )));
        }
        if self.hidden_dim == 0 {
            return Err(Error::config("hidden dimension must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == Some(0) {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.recon_weight > 0.0 && self.recon_weight.is_finite()) {
            return Err(Error::config(format!(
                "reconstruction weight must be positive, got {}",
                self.recon_weight
            )));
        }
        Ok(())
    }

    fn effective_batch_size(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.min(n.max(1)),
            None if n < 2 * DEFAULT_BATCH_SIZE => n.max(1),
            None => DEFAULT_BATCH_SIZE,
        }
    }
}

/// Diagonal Gaussian `N(mu, diag(exp(logvar)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPosterior {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl LatentPosterior {
    pub fn standard(d: usize) -> Self {
        Self {
            mu: vec![0.0; d],
            logvar: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.logvar.iter().map(|l| l.exp()).collect()
    }

    pub fn std_dev(&self) -> Vec<f64> {
        self.logvar.iter().map(|l| (0.5 * l).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeParams {
    pub config: VaeConfig,
    pub encoder_hidden: DenseLayer,
    pub encoder_mu: DenseLayer,
    pub encoder_logvar: DenseLayer,
    pub decoder_hidden: DenseLayer,
    pub decoder_out: DenseLayer,
}

/// Per-point loss decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    pub reconstruction: f64,
    pub kl: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.kl
    }
}

impl VaeParams {
    /// Uniform fan-in initialization from the `"vae-init"` substream of the
    /// config seed.
    pub fn init(config: &VaeConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(config.seed, "vae-init", 0);
        let (m, h, d) = (config.input_dim, config.hidden_dim, config.latent_dim);
        Ok(Self {
            config: config.clone(),
            encoder_hidden: DenseLayer::init_uniform(m, h, Activation::Softplus, &mut rng),
            encoder_mu: DenseLayer::init_uniform(h, d, Activation::Identity, &mut rng),
            encoder_logvar: DenseLayer::init_uniform(h, d, Activation::Identity, &mut rng),
            decoder_hidden: DenseLayer::init_uniform(d, h, Activation::Softplus, &mut rng),
            decoder_out: DenseLayer::init_uniform(h, m, Activation::Sigmoid, &mut rng),
        })
    }

    pub fn zeros(config: &VaeConfig) -> Result<Self> {
        config.validate()?;
        let (m, h, d) = (config.input_dim, config.hidden_dim, config.latent_dim);
        Ok(Self {
            config: config.clone(),
            encoder_hidden: DenseLayer::zeros(m, h, Activation::Softplus),
            encoder_mu: DenseLayer::zeros(h, d, Activation::Identity),
            encoder_logvar: DenseLayer::zeros(h, d, Activation::Identity),
            decoder_hidden: DenseLayer::zeros(d, h, Activation::Softplus),
            decoder_out: DenseLayer::zeros(h, m, Activation::Sigmoid),
        })
    }

    fn layers(&self) -> [&DenseLayer; 5] {
        [
            &self.encoder_hidden,
            &self.encoder_mu,
            &self.encoder_logvar,
            &self.decoder_hidden,
            &self.decoder_out,
        ]
    }

    fn layers_mut(&mut self) -> [&mut DenseLayer; 5] {
        [
            &mut self.encoder_hidden,
            &mut self.encoder_mu,
            &mut self.encoder_logvar,
            &mut self.decoder_hidden,
            &mut self.decoder_out,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// All parameters, layer by layer (weights row-major, then bias).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            l.write_params(&mut out);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for l in self.layers_mut() {
            offset += l.read_params(&flat[offset..]);
        }
        Ok(())
    }

    pub fn encode(&self, x: &[f64]) -> Result<LatentPosterior> {
        if x.len() != self.config.input_dim {
            return Err(Error::shape(format!(
                "encoder expects {} inputs, got {}",
                self.config.input_dim,
                x.len()
            )));
        }
        let h = self.encoder_hidden.forward(x)?;
        let mu = self.encoder_mu.forward(&h)?;
        let logvar = self
            .encoder_logvar
            .forward(&h)?
            .into_iter()
            .map(|v| v.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP))
            .collect();
        Ok(LatentPosterior { mu, logvar })
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        let h = self.decoder_hidden.forward(z)?;
        self.decoder_out.forward(&h)
    }

    /// Loss terms for one point with a fixed standard-normal draw `eps`.
    pub fn elbo_terms(&self, x: &[f64], eps: &[f64]) -> Result<ElboTerms> {
        let post = self.encode(x)?;
        let z = reparameterize_with(&post, eps)?;
        let x_hat = self.decode(&z)?;
        let sq: f64 = x_hat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(ElboTerms {
            reconstruction: self.config.recon_weight * sq,
            kl: kl_to_standard_normal(&post),
        })
    }

    /// Loss terms and the gradient of their sum with respect to
    /// [`to_flat`](Self::to_flat), for a fixed draw `eps`.
    pub fn elbo_gradient(&self, x: &[f64], eps: &[f64]) -> Result<(ElboTerms, Vec<f64>)> {
        let post = self.encode(x)?;
        let z = reparameterize_with(&post, eps)?;
        let h_enc = self.encoder_hidden.forward(x)?;
        let raw_logvar = self.encoder_logvar.forward(&h_enc)?;
        let h_dec = self.decoder_hidden.forward(&z)?;
        let x_hat = self.decoder_out.forward(&h_dec)?;

        let w = self.config.recon_weight;
        let sq: f64 = x_hat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let terms = ElboTerms {
            reconstruction: w * sq,
            kl: kl_to_standard_normal(&post),
        };

        let d_xhat: Vec<f64> = x_hat.iter().zip(x).map(|(a, b)| 2.0 * w * (a - b)).collect();
        let g_out = self.decoder_out.backward(&h_dec, &d_xhat)?;
        let g_dhid = self.decoder_hidden.backward(&z, &g_out.input)?;
        let dz = &g_dhid.input;

        let d_mu: Vec<f64> = dz.iter().zip(&post.mu).map(|(g, m)| g + m).collect();
        let d_logvar: Vec<f64> = (0..post.dim())
            .map(|k| {
                if raw_logvar[k].abs() > LOGVAR_CLAMP {
                    return 0.0;
                }
                let s = (0.5 * post.logvar[k]).exp();
                dz[k] * eps[k] * 0.5 * s + 0.5 * (post.logvar[k].exp() - 1.0)
            })
            .collect();
        let g_mu = self.encoder_mu.backward(&h_enc, &d_mu)?;
        let g_lv = self.encoder_logvar.backward(&h_enc, &d_logvar)?;
        let d_henc: Vec<f64> = g_mu.input.iter().zip(&g_lv.input).map(|(a, b)| a + b).collect();
        let g_ehid = self.encoder_hidden.backward(x, &d_henc)?;

        let mut grad = Vec::with_capacity(self.param_count());
        for g in [&g_ehid, &g_mu, &g_lv, &g_dhid, &g_out] {
            g.write_params(&mut grad);
        }
        Ok((terms, grad))
    }
}

pub fn encode(params: &VaeParams, x: &[f64]) -> Result<LatentPosterior> {
    params.encode(x)
}

/// `z = mu + exp(logvar / 2) * eps` for a given noise vector.
pub fn reparameterize_with(post: &LatentPosterior, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != post.dim() {
        return Err(Error::shape(format!(
            "noise has {} entries, posterior has dimension {}",
            eps.len(),
            post.dim()
        )));
    }
    Ok(post
        .mu
        .iter()
        .zip(&post.logvar)
        .zip(eps)
        .map(|((m, l), e)| m + (0.5 * l).exp() * e)
        .collect())
}

pub fn standard_normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn reparameterize<R: Rng + ?Sized>(post: &LatentPosterior, rng: &mut R) -> Vec<f64> {
    let eps = standard_normal_vec(post.dim(), rng);
    reparameterize_with(post, &eps).expect("noise sized to the posterior")
}

/// `KL(N(mu, diag(exp(logvar))) || N(0, I))`.
pub fn kl_to_standard_normal(post: &LatentPosterior) -> f64 {
    0.5 * post
        .mu
        .iter()
        .zip(&post.logvar)
        .map(|(m, l)| m * m + l.exp() - 1.0 - l)
        .sum::<f64>()
}

/// Negative ELBO for one point with one reparameterized sample from `rng`.
pub fn elbo_loss<R: Rng + ?Sized>(params: &VaeParams, x: &[f64], rng: &mut R) -> Result<f64> {
    let eps = standard_normal_vec(params.config.latent_dim, rng);
    Ok(params.elbo_terms(x, &eps)?.total())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedVae {
    pub params: VaeParams,
    /// Mean per-point loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Minibatch Adam on the mean negative ELBO. Batch order and noise come from
/// the `"vae-train"` substream of the config seed.
pub fn train_vae(dataset: &Dataset, config: &VaeConfig) -> Result<TrainedVae> {
    config.validate()?;
    if dataset.input_dim() != config.input_dim {
        return Err(Error::shape(format!(
            "config input_dim {} but dataset has {} features",
            config.input_dim,
            dataset.input_dim()
        )));
    }
    let mut params = VaeParams::init(config)?;
    let n = dataset.len();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    if n == 0 || config.epochs == 0 {
        return Ok(TrainedVae {
            params,
            epoch_losses,
        });
    }
    let mut rng: StreamRng = substream(config.seed, "vae-train", 0);
    let mut adam = AdamState::new(params.param_count(), config.learning_rate);
    let mut flat = params.to_flat();
    let batch = config.effective_batch_size(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad_sum = vec![0.0; flat.len()];

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            grad_sum.fill(0.0);
            for &i in chunk {
                let eps = standard_normal_vec(config.latent_dim, &mut rng);
                let (terms, g) = params.elbo_gradient(dataset.features.row(i), &eps)?;
                epoch_loss += terms.total();
                for (s, v) in grad_sum.iter_mut().zip(&g) {
                    *s += v;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            for s in &mut grad_sum {
                *s *= scale;
            }
            adam.step(&mut flat, &grad_sum).map_err(|e| {
                Error::numeric(format!("VAE training diverged in epoch {}: {e}", epoch + 1))
            })?;
            params.set_flat(&flat)?;
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite VAE loss in epoch {}",
                epoch + 1
            )));
        }
        epoch_losses.push(mean);
    }
    Ok(TrainedVae {
        params,
        epoch_losses,
    })
}

/// Encodes every row of `features` and draws exactly one latent sample per
/// row; row `i` uses the `("latent", i)` substream of `seed`.
pub fn latent_dataset(
    params: &VaeParams,
    features: &Matrix,
    seed: u64,
) -> Result<(Matrix, Vec<LatentPosterior>)> {
    let d = params.config.latent_dim;
    let mut z = Matrix::zeros(features.rows(), d);
    let mut posteriors = Vec::with_capacity(features.rows());
    for i in 0..features.rows() {
        let post = params.encode(features.row(i))?;
        let mut rng = substream(seed, "latent", i as u64);
        let sample = reparameterize(&post, &mut rng);
        for (k, v) in sample.into_iter().enumerate() {
            z.set(i, k, v);
        }
        posteriors.push(post);
    }
    Ok((z, posteriors))
}
