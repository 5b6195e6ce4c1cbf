use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pcenet::data::{split, SplitIndices};
use pcenet::metrics::EvalReport;
use pcenet::moments::{write_moment_csv, MomentEngine, MomentMethod, MomentRequest, MomentRow};
use pcenet::pce::PceModel;
use pcenet::pipeline::{
    apply_override, direct_latent_ols, evaluate_trial, fit_trial, load_data, prepare_trial,
    run_pipeline_with, synth_latent_polynomial, write_artifacts, write_json_file, FitMethod,
    RunConfig,
};
use pcenet::rng::derive_seed;
use pcenet::vae::LatentPosterior;

/// VAE dimensionality reduction with a Hermite polynomial chaos surrogate
/// fitted by maximum mean discrepancy.
#[derive(Parser)]
#[command(name = "pcenet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full training and evaluation over all trials.
    Run(RunArgs),
    /// Train the VAE for trial 0 and write posteriors and latent samples.
    TrainVae(CommonArgs),
    /// Train the VAE and fit PCE coefficients for trial 0.
    FitPce(FitArgs),
    /// Score a fitted model on the test split of trial 0.
    Evaluate(EvaluateArgs),
    /// Same as `run` with least squares in place of MMD fitting.
    BaselineOls(BaselineArgs),
    /// Conditional moment of a fitted model at one data point.
    Moments(MomentsArgs),
    /// Write a synthetic latent-polynomial dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Config override, e.g. `--set vae.epochs=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to the config's `output_dir`, else `pcenet-out`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Run up to this many trials at once.
    #[arg(long, default_value_t = 1)]
    parallel_trials: usize,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 1)]
    parallel_trials: usize,
    /// Synthetic data only: fit in the generator's latent coordinates,
    /// skipping the VAE.
    #[arg(long)]
    true_latents: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mmd,
    Ols,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "mmd")]
    method: MethodArg,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    model: PathBuf,
    /// Defaults to `posteriors.json` next to the model.
    #[arg(long)]
    posteriors: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegrationArg {
    Auto,
    Quadrature,
    MonteCarlo,
}

#[derive(Args)]
struct MomentsArgs {
    #[arg(long)]
    model: PathBuf,
    /// Defaults to `posteriors.json` next to the model.
    #[arg(long)]
    posteriors: Option<PathBuf>,
    #[arg(long)]
    point_index: usize,
    /// Moment order.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum, default_value = "auto")]
    method: IntegrationArg,
    /// Quadrature points per dimension (default: model degree + 1).
    #[arg(long)]
    points_per_dim: Option<usize>,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Monte Carlo seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the result to this CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    d_true: usize,
    #[arg(long)]
    degree: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path to write.
    #[arg(long)]
    output: PathBuf,
}

/// Exit 1 for bad invocations and configs, 2 for failures while running.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = thread_cap() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `PCENET_THREADS`, if set to a positive integer.
fn thread_cap() -> Option<usize> {
    std::env::var("PCENET_THREADS")
        .ok()?
        .parse()
        .ok()
        .filter(|n| *n > 0)
}

fn load_config(args: &CommonArgs) -> Result<(RunConfig, PathBuf), Failure> {
    let mut config = RunConfig::load(&args.config).map_err(usage)?;
    for assignment in &args.overrides {
        config = apply_override(&config, assignment).map_err(usage)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(usage)?;
    let out = args
        .output
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("pcenet-out"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((config, out))
}

fn trial_threads(requested: usize) -> usize {
    match thread_cap() {
        Some(cap) => requested.min(cap).max(1),
        None => requested.max(1),
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json value"));
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => {
            let (config, out) = load_config(&args.common)?;
            let result =
                run_pipeline_with(&config, FitMethod::Mmd, trial_threads(args.parallel_trials))?;
            write_artifacts(&result, &out)?;
            print_json(&json!({ "output": out, "summary": result.summary }));
        }
        Command::BaselineOls(args) => {
            let (config, out) = load_config(&args.common)?;
            if args.true_latents {
                let loaded = load_data(&config)?;
                let synth = loaded
                    .synthetic
                    .ok_or_else(|| usage(anyhow!("--true-latents needs a synthetic data source")))?;
                let mut errors = Vec::new();
                for k in 0..config.trials {
                    let sp = trial_split(&config, synth.dataset.len(), k)?;
                    let (model, err) =
                        direct_latent_ols(&synth, &sp, config.pce.degree, config.mmd.ols_ridge)?;
                    write_json_file(out.join(format!("model_trial_{k}.json")), &model)?;
                    errors.push(err);
                }
                write_json_file(out.join("direct_latent_ols.json"), &json!({ "epsilon_gen": errors }))?;
                print_json(&json!({ "output": out, "epsilon_gen": errors }));
            } else {
                let result =
                    run_pipeline_with(&config, FitMethod::Ols, trial_threads(args.parallel_trials))?;
                write_artifacts(&result, &out)?;
                print_json(&json!({ "output": out, "summary": result.summary }));
            }
        }
        Command::TrainVae(args) => {
            let (config, out) = load_config(&args)?;
            let data = load_data(&config)?.dataset;
            let prepared = prepare_trial(&config, &data, 0)?;
            write_json_file(out.join("vae.json"), &prepared.vae)?;
            write_json_file(out.join("posteriors.json"), &prepared.posteriors)?;
            write_json_file(out.join("split.json"), &prepared.split)?;
            write_latents(&out.join("latents.csv"), &prepared.latents)?;
            print_json(&json!({
                "output": out,
                "epoch_losses": prepared.vae_losses.len(),
                "final_loss": prepared.vae_losses.last(),
            }));
        }
        Command::FitPce(args) => {
            let (config, out) = load_config(&args.common)?;
            let method = match args.method {
                MethodArg::Mmd => FitMethod::Mmd,
                MethodArg::Ols => FitMethod::Ols,
            };
            let data = load_data(&config)?.dataset;
            let prepared = prepare_trial(&config, &data, 0)?;
            let (model, trace) = fit_trial(&config, &prepared, method)?;
            write_json_file(out.join("model.json"), &model)?;
            write_json_file(out.join("trace.json"), &trace)?;
            write_json_file(out.join("vae.json"), &prepared.vae)?;
            write_json_file(out.join("posteriors.json"), &prepared.posteriors)?;
            print_json(&json!({
                "output": out,
                "selected_sigma": trace.selected_sigma,
                "coefficients": model.coefficients(),
            }));
        }
        Command::Evaluate(args) => {
            let (config, out) = load_config(&args.common)?;
            let model = read_model(&args.model)?;
            let posteriors = read_posteriors(&posteriors_path(&args.model, args.posteriors))?;
            let data = load_data(&config)?.dataset;
            if posteriors.len() != data.len() {
                return Err(usage(anyhow!(
                    "{} posteriors for {} data points; were they produced with this config?",
                    posteriors.len(),
                    data.len()
                )));
            }
            let sp = trial_split(&config, data.len(), 0)?;
            let report: EvalReport = evaluate_trial(
                &config,
                &model,
                &posteriors,
                &data.targets,
                &sp.test,
                config.trial_seed(0),
            )?;
            write_json_file(out.join("eval.json"), &report)?;
            report.histogram.write_csv(out.join("residual_hist.csv"))?;
            print_json(&json!({
                "epsilon_gen": report.epsilon_gen,
                "within_one_sd": report.within_one_sd,
                "test_points": sp.test.len(),
            }));
        }
        Command::Moments(args) => moments(args)?,
        Command::Synth(args) => {
            let synth = synth_latent_polynomial(
                args.n,
                args.m,
                args.d_true,
                args.degree,
                args.noise_sd,
                args.seed,
            )
            .map_err(usage)?;
            synth.dataset.write_csv(&args.output)?;
            print_json(&json!({ "output": args.output, "rows": args.n }));
        }
    }
    Ok(())
}

fn trial_split(config: &RunConfig, n: usize, trial: usize) -> pcenet::Result<SplitIndices> {
    split(n, config.split, derive_seed(config.trial_seed(trial), "split", 0))
}

fn posteriors_path(model: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| model.with_file_name("posteriors.json"))
}

fn read_model(path: &Path) -> Result<PceModel, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model {}", path.display()))
        .map_err(usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing model {}", path.display()))
        .map_err(usage)
}

fn read_posteriors(path: &Path) -> Result<Vec<LatentPosterior>, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading posteriors {}", path.display()))
        .map_err(usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing posteriors {}", path.display()))
        .map_err(usage)
}

fn write_latents(path: &Path, z: &pcenet::nncore::Matrix) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..z.cols()).map(|k| format!("z{k}")))?;
    for i in 0..z.rows() {
        w.write_record(z.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn moments(args: MomentsArgs) -> Result<(), Failure> {
    let model = read_model(&args.model)?;
    let posteriors = read_posteriors(&posteriors_path(&args.model, args.posteriors))?;
    let post = posteriors.get(args.point_index).ok_or_else(|| {
        usage(anyhow!(
            "point index {} out of range ({} points)",
            args.point_index,
            posteriors.len()
        ))
    })?;
    let d = model.latent_dim();
    let degree = model.basis().degree();
    let method = match args.method {
        IntegrationArg::Auto => MomentMethod::auto(degree, d, args.seed),
        IntegrationArg::Quadrature => MomentMethod::Quadrature {
            points_per_dim: args.points_per_dim.unwrap_or(degree + 1),
        },
        IntegrationArg::MonteCarlo => MomentMethod::MonteCarlo {
            samples: args.samples,
            seed: args.seed,
        },
    };
    let request = MomentRequest::new(args.k, method).map_err(usage)?;
    let engine = MomentEngine::new(request.method, d).map_err(usage)?;
    let value = engine.moment(&model, post, request.order, args.point_index as u64)?;
    let row = MomentRow {
        point_index: args.point_index,
        k: args.k,
        method: method.label().to_string(),
        value,
    };
    if let Some(path) = &args.csv {
        write_moment_csv(path, std::slice::from_ref(&row))?;
    }
    print_json(&serde_json::to_value(&row).map_err(anyhow::Error::from)?);
    Ok(())
}
