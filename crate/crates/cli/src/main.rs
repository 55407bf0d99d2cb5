use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod error;
mod tasks;

use config::{parse_window, ExperimentConfig, Format};
use error::CliError;
use tasks::{task_registry, Context};

/// Edge-channel scattering and interface conductivity for Dirac operators
/// with a domain wall.
#[derive(Debug, Parser)]
#[command(name = "edgescatter", version)]
struct Args {
    /// Experiment config (.toml or .json).
    #[arg(long)]
    config: Option<PathBuf>,
    /// spectrum | channels | scatter | conductivity | validate
    #[arg(long)]
    task: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    energy: Option<f64>,
    /// Energy window as `E-,E+`.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<[f64; 2]>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(args: Args) -> Result<bool, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.task = args.task.or(cfg.task);
    cfg.energy = args.energy.or(cfg.energy);
    cfg.window = args.window.or(cfg.window);
    cfg.output = args.out.or(cfg.output);
    cfg.format = args.format.or(cfg.format);
    cfg.seed = args.seed.unwrap_or(cfg.seed);

    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }

    let registry = task_registry();
    let name = cfg
        .task
        .clone()
        .ok_or_else(|| CliError::Config(format!("no task given; choose one of {}", registry.names().join(", "))))?;
    let task = registry.get(&name)?;
    let format = cfg.format.unwrap_or_else(|| task.default_format());
    let output = cfg.output.clone();
    let ctx = Context::new(cfg, format)?;
    log::info!("running task `{name}`");
    let outcome = task.run(&ctx)?;
    match output {
        Some(path) => std::fs::write(&path, &outcome.body).map_err(|source| CliError::Write { path, source })?,
        None => print!("{}", outcome.body),
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EDGESCATTER_LOG", "warn")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("edgescatter: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
