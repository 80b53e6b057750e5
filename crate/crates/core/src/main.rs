use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use glfm::explore::{build_report, check_schema, PlugIn};
use glfm::io::{self, RunConfig, Schema};
use glfm::sampler::{impute, Uncertainty};
use glfm::{simulate, FitResult, HeterogeneousDataset, Hyperparameters};

#[derive(Parser)]
#[command(name = "glfm", version, about = "General latent feature model for heterogeneous tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Gibbs sampler and write the fit artifact, trace and manifest.
    Fit(FitArgs),
    /// Build a per-pattern effects report from a fit.
    Explore(ExploreArgs),
    /// Fill missing cells with posterior predictive estimates.
    Impute(ImputeArgs),
    /// Draw a synthetic dataset from the generative model.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// JSON schema file describing the attributes.
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    burnin: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// IBP mass (initial value when it is sampled).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Prior standard deviation of the weights.
    #[arg(long, default_value_t = 1.0)]
    sigma_b: f64,
    /// Standard deviation of the auxiliary noise u.
    #[arg(long, default_value_t = 0.1)]
    sigma_u: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    sample_alpha: bool,
    /// Largest number of new features proposed per row.
    #[arg(long, default_value_t = 3)]
    kmax_new: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn hyper(&self) -> Hyperparameters {
        Hyperparameters {
            alpha: self.alpha,
            sigma_b2: self.sigma_b * self.sigma_b,
            sigma_u2: self.sigma_u * self.sigma_u,
            sample_alpha: self.sample_alpha,
            k_new_max: self.kmax_new,
            n_iterations: self.iters,
            burn_in: self.burnin,
            thinning: self.thin,
            seed: self.seed,
            ..Hyperparameters::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    /// Echoed into the manifest for later explore runs.
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    /// Independent chains with seeds seed, seed+1, ...; each writes to chain{i}/.
    #[arg(long, default_value_t = 1)]
    chains: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlugInArg {
    PosteriorMean,
    SampleAverage,
}

#[derive(Args)]
struct ExploreArgs {
    /// Fit artifact written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    #[command(flatten)]
    input: DataArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    min_count: usize,
    #[arg(long, value_enum, default_value_t = PlugInArg::PosteriorMean)]
    plug_in: PlugInArg,
    /// Accepted for interface uniformity; reports are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ImputeArgs {
    #[arg(long)]
    fit: PathBuf,
    #[command(flatten)]
    input: DataArgs,
    #[arg(long)]
    out: PathBuf,
    /// Accepted for interface uniformity; imputation is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Number of objects.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_b: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma_u: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Fit(args) => fit(args),
        Command::Explore(args) => explore(args),
        Command::Impute(args) => impute_cmd(args),
        Command::Simulate(args) => simulate_cmd(args),
    }
}

fn load(input: &DataArgs) -> Result<HeterogeneousDataset> {
    io::load(&input.data, &input.schema)
        .with_context(|| format!("loading {} with schema {}", input.data.display(), input.schema.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn fit(args: FitArgs) -> Result<()> {
    let config = RunConfig {
        data: args.input.data.clone(),
        schema: args.input.schema.clone(),
        out: args.out.clone(),
        hyper: args.model.hyper(),
        min_count: args.min_count,
        chains: args.chains,
    };
    config.check()?;
    let data = load(&args.input)?;
    for chain in 0..config.chains {
        let dir = if config.chains == 1 { config.out.clone() } else { config.out.join(format!("chain{chain}")) };
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let hyper = Hyperparameters { seed: config.hyper.seed + chain as u64, ..config.hyper.clone() };
        let start = Instant::now();
        let result = glfm::run(&data, &hyper)?;
        let wall = start.elapsed().as_secs_f64();
        io::write_fit(dir.join("fit.json.gz"), &result)?;
        write_trace(&dir.join("trace.csv"), &result)?;
        let mean_sweep = result.sweep_seconds.iter().sum::<f64>() / result.sweep_seconds.len().max(1) as f64;
        write_json(
            &dir.join("manifest.json"),
            &json!({
                "command": "fit",
                "seed": hyper.seed,
                "chain": chain,
                "config": RunConfig { hyper: hyper.clone(), ..config.clone() },
                "versions": {
                    "glfm": env!("CARGO_PKG_VERSION"),
                    "fit_format": io::FIT_FORMAT_VERSION,
                },
                "k_last": result.last().map(|s| s.k()),
                "k_modal": result.modal_k(),
                "retained_samples": result.samples.len(),
                "wall_time_seconds": wall,
                "mean_sweep_seconds": mean_sweep,
            }),
        )?;
        println!(
            "chain {chain}: seed {}, modal K {}, last K {}, {:.1}s",
            hyper.seed,
            result.modal_k(),
            result.last().map_or(0, |s| s.k()),
            wall
        );
    }
    Ok(())
}

fn write_trace(path: &Path, fit: &FitResult) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["iteration", "loglik", "k"])?;
    for (i, (ll, k)) in fit.loglik_trace.iter().zip(&fit.k_trace).enumerate() {
        out.write_record([(i + 1).to_string(), format!("{ll:?}"), k.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn load_fit_for(fit_path: &Path, input: &DataArgs) -> Result<(FitResult, HeterogeneousDataset)> {
    let fit = io::read_fit(fit_path).with_context(|| format!("reading fit {}", fit_path.display()))?;
    let data = load(input)?;
    check_schema(&fit, &data)?;
    if fit.n_objects != data.n_objects() {
        bail!("fit covers {} objects, data has {}", fit.n_objects, data.n_objects());
    }
    Ok((fit, data))
}

fn explore(args: ExploreArgs) -> Result<()> {
    let (fit, data) = load_fit_for(&args.fit, &args.input)?;
    let plug_in = match args.plug_in {
        PlugInArg::PosteriorMean => PlugIn::PosteriorMean,
        PlugInArg::SampleAverage => PlugIn::SampleAverage,
    };
    let report = build_report(&fit, &data, args.min_count, plug_in)?;
    report.write(&args.out)?;
    write_json(
        &args.out.join("manifest.json"),
        &json!({
            "command": "explore",
            "seed": args.seed.unwrap_or(fit.hyper.seed),
            "fit": args.fit,
            "data": args.input.data,
            "schema": args.input.schema,
            "min_count": args.min_count,
            "plug_in": plug_in,
            "versions": { "glfm": env!("CARGO_PKG_VERSION") },
        }),
    )?;
    println!("K = {}, {} patterns", report.metadata.k, report.patterns.len());
    Ok(())
}

fn impute_cmd(args: ImputeArgs) -> Result<()> {
    let (fit, data) = load_fit_for(&args.fit, &args.input)?;
    let result = impute(&fit, &data);
    fs::create_dir_all(&args.out)?;
    io::write_csv(&result.completed, fs::File::create(args.out.join("completed.csv"))?)?;
    let mut out = csv::Writer::from_path(args.out.join("uncertainty.csv"))?;
    out.write_record(["row", "attribute", "value", "entropy", "lower", "upper"])?;
    for cell in &result.cells {
        let attr = data.attribute(cell.column);
        let (entropy, lower, upper) = match cell.uncertainty {
            Uncertainty::Entropy(h) => (format!("{h:?}"), String::new(), String::new()),
            Uncertainty::Interval { lower, upper } => (String::new(), format!("{lower:?}"), format!("{upper:?}")),
        };
        out.write_record([
            (cell.row + 1).to_string(),
            attr.name.clone(),
            io::format_value(Some(cell.value), &attr.kind),
            entropy,
            lower,
            upper,
        ])?;
    }
    out.flush()?;
    write_json(
        &args.out.join("manifest.json"),
        &json!({
            "command": "impute",
            "seed": args.seed.unwrap_or(fit.hyper.seed),
            "fit": args.fit,
            "data": args.input.data,
            "schema": args.input.schema,
            "imputed_cells": result.cells.len(),
            "versions": { "glfm": env!("CARGO_PKG_VERSION") },
        }),
    )?;
    println!("imputed {} cells", result.cells.len());
    Ok(())
}

fn simulate_cmd(args: SimulateArgs) -> Result<()> {
    let schema = Schema::read(&args.schema)?;
    let hyper = Hyperparameters {
        alpha: args.alpha,
        sigma_b2: args.sigma_b * args.sigma_b,
        sigma_u2: args.sigma_u * args.sigma_u,
        seed: args.seed,
        ..Hyperparameters::default()
    };
    hyper.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (data, truth) = simulate::simulate(args.n, schema.attribute_types()?, &hyper, &mut rng)?;
    fs::create_dir_all(&args.out)?;
    io::write_csv(&data, fs::File::create(args.out.join("data.csv"))?)?;
    schema.write(args.out.join("schema.json"))?;
    fs::write(args.out.join("truth.json"), serde_json::to_vec_pretty(&truth)?)?;
    write_json(
        &args.out.join("manifest.json"),
        &json!({
            "command": "simulate",
            "seed": args.seed,
            "n": args.n,
            "hyper": hyper,
            "versions": { "glfm": env!("CARGO_PKG_VERSION") },
        }),
    )?;
    println!("simulated {} objects with K = {}", args.n, truth.z.first().map_or(0, |r| r.len() - 1));
    Ok(())
}
