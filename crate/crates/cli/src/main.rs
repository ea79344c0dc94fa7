mod bundle;
mod commands;
mod config;
mod error;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::bundle::Overrides;
use crate::commands::{Format, PredictArgs};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "qdmd",
    version,
    about = "Simulate driven open quantum systems and fit DMD models to them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Noise seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Drift (r̃) truncation rank.
    #[arg(long, global = true, value_name = "R")]
    rank: Option<usize>,
    /// Bilinear (r̂) truncation rank.
    #[arg(long = "rank-hat", global = true, value_name = "R")]
    rank_hat: Option<usize>,
    /// Measurement noise standard deviation.
    #[arg(long, global = true, value_name = "SIGMA")]
    noise: Option<f64>,
    /// Format for trajectory and prediction output.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Record wall-clock stage timings in reports.
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the configured system and write its trajectory.
    Simulate,
    /// Fit the configured algorithm to one or more trajectory files.
    Fit {
        #[arg(required = true, value_name = "TRAJECTORY")]
        data: Vec<PathBuf>,
    },
    /// Roll a saved model forward.
    Predict {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Initial state as comma-separated values; defaults to the config's.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Number of steps (periods for Floquet models).
        #[arg(long, default_value_t = 0)]
        steps: usize,
        /// Reference trajectory for per-step errors.
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
    },
    /// Reproduce one of the worked examples as an output bundle.
    Example {
        #[arg(value_parser = clap::value_parser!(u32).range(1..=3))]
        number: u32,
    },
}

fn load_config(cli: &Cli) -> CliResult<Option<ExperimentConfig>> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.noise.seed = s;
    }
    if let Some(n) = cli.noise {
        cfg.noise.sigma = n;
    }
    if cli.rank.is_some() || cli.rank_hat.is_some() {
        if let Some(alg) = cfg.algorithm.take() {
            cfg.algorithm = Some(alg.with_ranks(cli.rank, cli.rank_hat)?);
        }
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.as_ref()?.dir.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn require(cfg: Option<ExperimentConfig>) -> CliResult<ExperimentConfig> {
    cfg.ok_or_else(|| CliError::config("--config is required for this command"))
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("QDMD_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| {
        CliError::config(format!(
            "QDMD_THREADS: expected a positive integer, got '{value}'"
        ))
    })?;
    if n == 0 {
        return Err(CliError::config("QDMD_THREADS must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("QDMD_THREADS: {e}")))
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Simulate => {
            let cfg = require(load_config(cli)?)?;
            let out = out_dir(cli, Some(&cfg));
            let path = commands::cmd_simulate(&cfg, &out, cli.format)?;
            println!("{}", path.display());
        }
        Command::Fit { data } => {
            let cfg = require(load_config(cli)?)?;
            let out = out_dir(cli, Some(&cfg));
            let written = commands::cmd_fit(&cfg, data, &out, cli.timings)?;
            println!("{}", written.model.display());
            println!("{}", written.report.display());
        }
        Command::Predict {
            model,
            x0,
            steps,
            truth,
        } => {
            let cfg = load_config(cli)?;
            let out = out_dir(cli, cfg.as_ref());
            let (path, err) = commands::cmd_predict(&PredictArgs {
                model,
                config: cfg.as_ref(),
                x0: x0.clone(),
                steps: *steps,
                truth: truth.as_deref(),
                out: &out,
                format: cli.format,
            })?;
            println!("{}", path.display());
            if let Some(e) = err {
                println!("relative error {e}");
            }
        }
        Command::Example { number } => {
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| Path::new(".").join(format!("example{number}")));
            let ov = Overrides {
                config: cli.config.clone(),
                seed: cli.seed,
                noise: cli.noise,
                rank: cli.rank,
                rank_hat: cli.rank_hat,
            };
            let report = bundle::run_example(*number, &out, &ov, cli.timings)?;
            for (name, value) in &report.metrics {
                println!("{name} = {value}");
            }
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
