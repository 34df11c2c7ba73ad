//! Batch front end for the shortfall lattice, Monte Carlo and diagnostic suites.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use shortfall_core::dp::Precision;
use shortfall_core::kernel::ProjectionScheme;

use commands::{Runner, Verb};
use config::{BoundSelection, RunConfig};
use error::CliError;

/// Environment variable consulted when `--threads` is absent.
const THREADS_ENV: &str = "SHORTFALL_THREADS";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProjectionArg {
    Ps1,
    Ps2,
    Ps3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    F64,
    F32,
}

#[derive(Debug, Parser)]
#[command(name = "shortfall", version, about = "Shortfall-risk tables on a truncated Heston lattice")]
struct Args {
    #[arg(value_enum)]
    verb: Verb,
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for result files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the SHORTFALL_THREADS environment variable.
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for grid checkpoints.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    projection: Option<ProjectionArg>,
    #[arg(long, value_enum)]
    bound: Option<BoundSelection>,
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
    /// Print state and operation counts without computing.
    #[arg(long)]
    dry_run: bool,
    /// Seed of every random stream.
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = args.projection {
        cfg.projection = match p {
            ProjectionArg::Ps1 => ProjectionScheme::Ps1,
            ProjectionArg::Ps2 => ProjectionScheme::Ps2,
            ProjectionArg::Ps3 => ProjectionScheme::Ps3,
        };
    }
    if let Some(b) = args.bound {
        cfg.bound = b;
    }
    if let Some(p) = args.precision {
        cfg.precision = match p {
            PrecisionArg::F64 => Precision::F64,
            PrecisionArg::F32 => Precision::F32,
        };
    }
    if let Some(seed) = args.seed {
        cfg.mc.seed = seed;
        cfg.demos.hullwhite.seed = seed;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.checkpoint.is_some() {
        cfg.checkpoint = args.checkpoint.clone();
    }
    let env_threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.parse::<usize>()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v} is not a count")))?,
        ),
        Err(_) => None,
    };
    if let Some(t) = args.threads.or(env_threads) {
        cfg.threads = Some(t);
    }
    if cfg.threads == Some(0) {
        return Err(CliError::Config("thread count must be at least 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: Args) -> Result<(), CliError> {
    let cfg = build_config(&args)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Resource(format!("thread pool: {e}")))?;
    }
    let runner = Runner {
        out: cfg.out.clone().unwrap_or_else(|| PathBuf::from("results")),
        cfg,
        verb: args.verb,
        dry_run: args.dry_run,
    };
    runner.run()
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("shortfall: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
