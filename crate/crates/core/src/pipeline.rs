//! End-to-end training and evaluation: VAE, one latent sample per point,
//! split, bandwidth selection, MMD fit, test-set metrics. Also the synthetic
//! latent-polynomial generator used for desk-scale checks.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, split, Dataset, ScalerParams, SplitIndices, SplitRatios, TargetColumn};
use crate::error::{Error, Result, StageExt};
use crate::metrics::{EvalReport, ErrorSummary, DEFAULT_HISTOGRAM_BINS};
use crate::mmd::{fit_mmd, select_sigma, FitTrace, MmdFitConfig, Validation};
use crate::moments::{MomentEngine, MomentMethod, DEFAULT_MC_SAMPLES};
use crate::nncore::Matrix;
use crate::pce::{ols_fit, PceBasis, PceModel};
use crate::rng::{derive_seed, substream};
use crate::vae::{latent_dataset, train_vae, LatentPosterior, VaeConfig, VaeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        target: TargetColumn,
    },
    Synthetic {
        n: usize,
        m: usize,
        d_true: usize,
        degree: usize,
        #[serde(default)]
        noise_sd: f64,
        /// Defaults to a substream of the run seed.
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeSettings {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "one")]
    pub recon_weight: f64,
}

fn one() -> f64 {
    1.0
}

impl VaeSettings {
    pub fn to_config(&self, input_dim: usize, seed: u64) -> VaeConfig {
        VaeConfig {
            input_dim,
            hidden_dim: self.hidden_dim,
            latent_dim: self.latent_dim,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            recon_weight: self.recon_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PceSettings {
    pub degree: usize,
    /// Fit on targets standardized with the fitting-set mean and standard
    /// deviation, then map coefficients back. Makes the sigma grid and the
    /// Adam step size independent of the target's units.
    #[serde(default = "yes")]
    pub standardize_targets: bool,
}

fn yes() -> bool {
    true
}

/// Affine target transform `(y - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TargetScale {
    shift: f64,
    scale: f64,
}

impl TargetScale {
    fn identity() -> Self {
        Self { shift: 0.0, scale: 1.0 }
    }

    fn fit(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let shift = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - shift).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { shift, scale }
    }

    fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.shift) / self.scale).collect()
    }

    /// Coefficients in original units; the constant basis term is first.
    fn restore(&self, mut c: Vec<f64>) -> Vec<f64> {
        for v in &mut c {
            *v *= self.scale;
        }
        if let Some(c0) = c.first_mut() {
            *c0 += self.shift;
        }
        c
    }
}

fn default_trials() -> usize {
    1
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_bins() -> usize {
    DEFAULT_HISTOGRAM_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub vae: VaeSettings,
    pub pce: PceSettings,
    #[serde(default)]
    pub mmd: MmdFitConfig,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Where artifacts go. Never part of a serialized result.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Samples per test point for the conditional mean and variance.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            Error::config(format!("invalid config at '{}': {}", e.path(), e.inner()))
        })
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        config.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if let DataSource::Csv { path, .. } = &mut self.data {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(dir) = &mut self.output_dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mmd.validate()?;
        self.split.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.mc_samples == 0 {
            return Err(Error::config("mc_samples must be at least 1"));
        }
        if self.histogram_bins == 0 {
            return Err(Error::config("histogram_bins must be at least 1"));
        }
        if self.mmd.sigma_grid.len() > 1 && self.split.validation <= 0.0 {
            return Err(Error::config(
                "choosing sigma from several candidates needs a validation split",
            ));
        }
        if let DataSource::Synthetic { n, m, d_true, noise_sd, .. } = &self.data {
            check_synthetic(*n, *m, *d_true, *noise_sd)?;
        }
        // Input width is only known after loading; check the rest now.
        self.vae.to_config(usize::MAX, 0).validate()
    }

    /// Seed of trial `k`.
    pub fn trial_seed(&self, k: usize) -> u64 {
        derive_seed(self.seed, "trial", k as u64)
    }

    pub fn to_json_value(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }
}

fn check_synthetic(n: usize, m: usize, d_true: usize, noise_sd: f64) -> Result<()> {
    if n == 0 || d_true == 0 || d_true > m {
        return Err(Error::config(format!(
            "synthetic data needs n >= 1 and 1 <= d_true <= m (n={n}, m={m}, d_true={d_true})"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::config(format!("noise_sd must be nonnegative, got {noise_sd}")));
    }
    Ok(())
}

/// Applies a `key.path=value` override. The key must already exist in the
/// config; the value is parsed as JSON, falling back to a plain string.
pub fn apply_override(config: &RunConfig, assignment: &str) -> Result<RunConfig> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{assignment}' is not key=value")))?;
    let mut value = config.to_json_value()?;
    if let Some(map) = value.as_object_mut() {
        // Optional and omitted when unset.
        map.entry("output_dir").or_insert(serde_json::Value::Null);
    }
    let mut slot = &mut value;
    for part in key.split('.') {
        slot = match slot {
            serde_json::Value::Object(map) if map.contains_key(part) => {
                map.get_mut(part).expect("key present")
            }
            serde_json::Value::Array(items) => match part.parse::<usize>() {
                Ok(i) if i < items.len() => &mut items[i],
                _ => return Err(Error::config(format!("unknown config key '{key}'"))),
            },
            _ => return Err(Error::config(format!("unknown config key '{key}'"))),
        };
    }
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.into()));
    let text = serde_json::to_string(&value)?;
    let updated = RunConfig::from_json(&text)?;
    Ok(updated)
}

/// Output of [`synth_latent_polynomial`]: the observed data plus the hidden
/// latent coordinates and response polynomial.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub latents: Matrix,
    pub truth: PceModel,
}

/// `w ~ N(0, I)`, `x = A w + b` (min-max scaled), `y = Q(w) + noise`, where
/// `Q` is a Hermite expansion with constant term in `[1, 2)` and standard
/// normal higher coefficients.
pub fn synth_latent_polynomial(
    n: usize,
    m: usize,
    d_true: usize,
    degree: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<SyntheticData> {
    check_synthetic(n, m, d_true, noise_sd)?;
    let mut rng = substream(seed, "synth", 0);
    let a = Matrix::from_fn(m, d_true, |_, _| StandardNormal.sample(&mut rng));
    let b: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let basis = PceBasis::new(d_true, degree)?;
    let coefficients: Vec<f64> = (0..basis.size())
        .map(|j| {
            if j == 0 {
                rng.random_range(1.0..2.0)
            } else {
                StandardNormal.sample(&mut rng)
            }
        })
        .collect();
    let truth = PceModel::new(basis, coefficients)?;

    let latents = Matrix::from_fn(n, d_true, |_, _| StandardNormal.sample(&mut rng));
    let mut features = Matrix::zeros(n, m);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let w = latents.row(i);
        let x = a.matvec(w)?;
        for k in 0..m {
            features.set(i, k, x[k] + b[k]);
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        targets.push(truth.predict(w)? + noise_sd * noise);
    }
    let names = (0..m).map(|k| format!("x{k}")).collect();
    let dataset = crate::data::minmax_scale(Dataset::new(features, targets, names, "y".to_string())?);
    Ok(SyntheticData {
        dataset,
        latents,
        truth,
    })
}

/// Unscaled data for a run, plus the generator output for synthetic sources.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub synthetic: Option<SyntheticData>,
}

pub fn load_data(config: &RunConfig) -> Result<LoadedData> {
    match &config.data {
        DataSource::Csv { path, target } => Ok(LoadedData {
            dataset: load_csv(path, target)?,
            synthetic: None,
        }),
        DataSource::Synthetic { n, m, d_true, degree, noise_sd, seed } => {
            let seed = seed.unwrap_or_else(|| derive_seed(config.seed, "synth", 0));
            let synth = synth_latent_polynomial(*n, *m, *d_true, *degree, *noise_sd, seed)?;
            Ok(LoadedData {
                dataset: synth.dataset.clone(),
                synthetic: Some(synth),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Mmd,
    Ols,
}

/// Everything upstream of the coefficient fit for one trial.
#[derive(Debug, Clone)]
pub struct PreparedTrial {
    pub trial: usize,
    pub seed: u64,
    pub split: SplitIndices,
    /// Features scaled with `scaler`, which is fitted on train + validation.
    pub dataset: Dataset,
    pub vae: VaeParams,
    pub vae_losses: Vec<f64>,
    /// One latent sample per data point.
    pub latents: Matrix,
    pub posteriors: Vec<LatentPosterior>,
}

impl PreparedTrial {
    fn targets(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.dataset.targets[i]).collect()
    }

    fn posteriors_at(&self, idx: &[usize]) -> Vec<LatentPosterior> {
        idx.iter().map(|&i| self.posteriors[i].clone()).collect()
    }
}

/// Split, scale, train the VAE on train + validation inputs, then encode all
/// points and draw one latent sample each.
pub fn prepare_trial(config: &RunConfig, data: &Dataset, trial: usize) -> Result<PreparedTrial> {
    let seed = config.trial_seed(trial);
    let split = split(data.len(), config.split, derive_seed(seed, "split", 0)).stage("split")?;
    let fitting = split.fitting();

    let scaler = ScalerParams::fit(&data.features.select_rows(&fitting));
    let mut dataset = data.clone();
    dataset.features = scaler.transform(&data.features).stage("scale")?;
    dataset.scaler = Some(scaler);

    let vae_config = config
        .vae
        .to_config(dataset.input_dim(), derive_seed(seed, "vae", 0));
    let trained = train_vae(&dataset.subset(&fitting), &vae_config).stage("vae")?;
    let (latents, posteriors) =
        latent_dataset(&trained.params, &dataset.features, derive_seed(seed, "latent", 0))
            .stage("latent")?;
    Ok(PreparedTrial {
        trial,
        seed,
        split,
        dataset,
        vae: trained.params,
        vae_losses: trained.epoch_losses,
        latents,
        posteriors,
    })
}

/// Chooses sigma on the validation split (fits on train only), then refits
/// on train + validation with the chosen bandwidth. OLS skips both. Losses in
/// the trace are in standardized units when `standardize_targets` is set.
pub fn fit_trial(
    config: &RunConfig,
    prepared: &PreparedTrial,
    method: FitMethod,
) -> Result<(PceModel, FitTrace)> {
    let basis = PceBasis::new(config.vae.latent_dim, config.pce.degree).stage("pce")?;
    let fitting = prepared.split.fitting();
    let fit_design = basis
        .design_matrix(&prepared.latents.select_rows(&fitting))
        .stage("pce")?;
    let raw_targets = prepared.targets(&fitting);
    let target_scale = if config.pce.standardize_targets {
        TargetScale::fit(&raw_targets)
    } else {
        TargetScale::identity()
    };
    let fit_targets = target_scale.apply(&raw_targets);

    let (coefficients, trace) = match method {
        FitMethod::Ols => {
            let c = ols_fit(&fit_design, &fit_targets, config.mmd.ols_ridge).stage("ols")?;
            let trace = FitTrace {
                losses: Vec::new(),
                best_iteration: 0,
                selected_sigma: None,
                cv_table: Vec::new(),
                converged: true,
            };
            (c, trace)
        }
        FitMethod::Mmd if config.mmd.sigma_grid.len() == 1 => {
            let sigma = config.mmd.sigma_grid[0];
            fit_mmd(&fit_design, &fit_targets, sigma, &config.mmd).stage("mmd")?
        }
        FitMethod::Mmd => {
            let train = &prepared.split.train;
            let train_design = basis
                .design_matrix(&prepared.latents.select_rows(train))
                .stage("cross-validation")?;
            let val_posteriors = prepared.posteriors_at(&prepared.split.validation);
            let val_targets = target_scale.apply(&prepared.targets(&prepared.split.validation));
            let engine = MomentEngine::new(
                MomentMethod::auto(
                    config.pce.degree,
                    config.vae.latent_dim,
                    derive_seed(prepared.seed, "mc-cv", 0),
                ),
                config.vae.latent_dim,
            )
            .stage("cross-validation")?;
            let selection = select_sigma(
                &config.mmd.sigma_grid,
                &basis,
                &train_design,
                &target_scale.apply(&prepared.targets(train)),
                &Validation {
                    posteriors: &val_posteriors,
                    targets: &val_targets,
                },
                &engine,
                &config.mmd,
            )
            .stage("cross-validation")?;
            let (c, mut trace) =
                fit_mmd(&fit_design, &fit_targets, selection.sigma, &config.mmd).stage("mmd")?;
            trace.cv_table = selection.trace.cv_table;
            (c, trace)
        }
    };
    let model = PceModel::new(basis, target_scale.restore(coefficients)).stage("mmd")?;
    Ok((model, trace))
}

/// Test-set metrics with Monte Carlo conditional means and variances.
/// Sample streams are keyed by the original data index.
pub fn evaluate_trial(
    config: &RunConfig,
    model: &PceModel,
    posteriors: &[LatentPosterior],
    targets: &[f64],
    test: &[usize],
    trial_seed: u64,
) -> Result<EvalReport> {
    let engine = MomentEngine::new(
        MomentMethod::MonteCarlo {
            samples: config.mc_samples,
            seed: derive_seed(trial_seed, "mc", 0),
        },
        model.latent_dim(),
    )?;
    let mut means = Vec::with_capacity(test.len());
    let mut vars = Vec::with_capacity(test.len());
    let mut y = Vec::with_capacity(test.len());
    for &i in test {
        let post = posteriors
            .get(i)
            .ok_or_else(|| Error::shape(format!("no posterior for data point {i}")))?;
        let (m, v) = engine.mean_var(model, post, i as u64)?;
        means.push(m);
        vars.push(v);
        y.push(targets[i]);
    }
    EvalReport::new(&y, &means, &vars, config.histogram_bins, trial_seed)
}

/// First three raw moments of the PCE responses at the sampled latents
/// against those of the observed outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatch {
    pub target: [f64; 3],
    pub response: [f64; 3],
    pub relative_error: [f64; 3],
}

impl MomentMatch {
    pub fn compute(model: &PceModel, latents: &Matrix, targets: &[f64]) -> Result<Self> {
        let responses = model.predict_many(latents)?;
        let raw = |v: &[f64], k: i32| v.iter().map(|x| x.powi(k)).sum::<f64>() / v.len() as f64;
        let mut out = Self {
            target: [0.0; 3],
            response: [0.0; 3],
            relative_error: [0.0; 3],
        };
        for k in 0..3 {
            out.target[k] = raw(targets, k as i32 + 1);
            out.response[k] = raw(&responses, k as i32 + 1);
            out.relative_error[k] =
                (out.response[k] - out.target[k]).abs() / out.target[k].abs().max(f64::MIN_POSITIVE);
        }
        Ok(out)
    }

    pub fn max_relative_error(&self) -> f64 {
        self.relative_error.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub split: SplitIndices,
    pub vae_final_loss: Option<f64>,
    pub model: PceModel,
    pub trace: FitTrace,
    pub eval: EvalReport,
    pub moment_match: MomentMatch,
    #[serde(skip)]
    pub vae: Option<VaeParams>,
    #[serde(skip)]
    pub posteriors: Vec<LatentPosterior>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub epsilon_gen: ErrorSummary,
    /// Share of pooled standardized residuals in `[-1, 1]`.
    pub within_one_sd: f64,
    pub moment_match_max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub method: FitMethod,
    pub trials: Vec<TrialResult>,
    pub summary: RunSummary,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn pooled_residuals(&self) -> Vec<f64> {
        self.trials
            .iter()
            .flat_map(|t| t.eval.residuals.iter().copied())
            .collect()
    }
}

pub fn run_trial(
    config: &RunConfig,
    data: &Dataset,
    trial: usize,
    method: FitMethod,
) -> Result<TrialResult> {
    let prepared = prepare_trial(config, data, trial)?;
    let (model, trace) = fit_trial(config, &prepared, method)?;
    let eval = evaluate_trial(
        config,
        &model,
        &prepared.posteriors,
        &prepared.dataset.targets,
        &prepared.split.test,
        prepared.seed,
    )
    .stage("evaluate")?;
    // Over the points the coefficients were fitted on.
    let fitting = prepared.split.fitting();
    let moment_match = MomentMatch::compute(
        &model,
        &prepared.latents.select_rows(&fitting),
        &prepared.targets(&fitting),
    )
    .stage("evaluate")?;
    Ok(TrialResult {
        trial,
        seed: prepared.seed,
        split: prepared.split,
        vae_final_loss: prepared.vae_losses.last().copied(),
        model,
        trace,
        eval,
        moment_match,
        vae: Some(prepared.vae),
        posteriors: prepared.posteriors,
    })
}

/// Runs every trial. With `parallel_trials > 1` trials run on a pool of that
/// many threads; results are identical to the sequential order.
pub fn run_pipeline_with(
    config: &RunConfig,
    method: FitMethod,
    parallel_trials: usize,
) -> Result<RunResult> {
    config.validate().stage("config")?;
    let data = load_data(config).stage("data")?.dataset;
    let trials: Vec<Result<TrialResult>> = if parallel_trials > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel_trials)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..config.trials)
                .into_par_iter()
                .map(|k| run_trial(config, &data, k, method))
                .collect()
        })
    } else {
        (0..config.trials)
            .map(|k| run_trial(config, &data, k, method))
            .collect()
    };
    let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;

    let errors: Vec<f64> = trials.iter().map(|t| t.eval.epsilon_gen).collect();
    let pooled: Vec<f64> = trials.iter().flat_map(|t| t.eval.residuals.iter().copied()).collect();
    let within = pooled.iter().filter(|r| r.abs() <= 1.0).count() as f64 / pooled.len().max(1) as f64;
    let summary = RunSummary {
        epsilon_gen: ErrorSummary::from_values(&errors).expect("at least one trial"),
        within_one_sd: within,
        moment_match_max_relative_error: trials
            .iter()
            .map(|t| t.moment_match.max_relative_error())
            .fold(0.0, f64::max),
    };
    let mut recorded = config.clone();
    recorded.output_dir = None;
    Ok(RunResult {
        config: recorded,
        method,
        trials,
        summary,
    })
}

pub fn run_pipeline(config: &RunConfig) -> Result<RunResult> {
    run_pipeline_with(config, FitMethod::Mmd, 1)
}

/// OLS in the generator's own latent coordinates, bypassing the VAE. Test
/// predictions are exact polynomial evaluations, so conditional variances
/// are zero.
pub fn direct_latent_ols(
    synth: &SyntheticData,
    split: &SplitIndices,
    degree: usize,
    ridge: f64,
) -> Result<(PceModel, f64)> {
    let basis = PceBasis::new(synth.latents.cols(), degree)?;
    let fitting = split.fitting();
    let design = basis.design_matrix(&synth.latents.select_rows(&fitting))?;
    let y: Vec<f64> = fitting.iter().map(|&i| synth.dataset.targets[i]).collect();
    let model = PceModel::new(basis, ols_fit(&design, &y, ridge)?)?;
    let test_y: Vec<f64> = split.test.iter().map(|&i| synth.dataset.targets[i]).collect();
    let pred = model.predict_many(&synth.latents.select_rows(&split.test))?;
    let err = crate::metrics::relative_generalization_error(&test_y, &pred)?;
    Ok((model, err))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn write_json_file<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_json(path.as_ref(), value)
}

/// Writes `result.json`, per-trial `eval_trial_k.json` and
/// `model_trial_k.json`, the pooled `residual_hist.csv`, and trial 0's
/// `model.json`, `trace.json`, `vae.json` and `posteriors.json`.
pub fn write_artifacts(result: &RunResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("result.json"), result)?;
    for t in &result.trials {
        write_json(&dir.join(format!("eval_trial_{}.json", t.trial)), &t.eval)?;
        write_json(&dir.join(format!("model_trial_{}.json", t.trial)), &t.model)?;
    }
    let pooled = result.pooled_residuals();
    crate::metrics::histogram_density(&pooled, result.config.histogram_bins)?
        .write_csv(dir.join("residual_hist.csv"))?;
    if let Some(first) = result.trials.first() {
        write_json(&dir.join("model.json"), &first.model)?;
        write_json(&dir.join("trace.json"), &first.trace)?;
        if let Some(vae) = &first.vae {
            write_json(&dir.join("vae.json"), vae)?;
        }
        write_json(&dir.join("posteriors.json"), &first.posteriors)?;
    }
    Ok(())
}
