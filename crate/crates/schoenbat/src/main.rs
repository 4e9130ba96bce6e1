//! Thin CLI over the experiment harness: one subcommand per experiment,
//! flags mirroring the config keys. All computation lives in the library.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use schoenbat::harness::{
    emit_csv, emit_json, parse_config_for, run, Experiment, ExperimentConfig,
};
use schoenbat::KernelId;

#[derive(Parser)]
#[command(
    name = "schoenbat",
    about = "Desk-scale experiments for kernelized attention with random Maclaurin features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximation error of the feature path across kernels, d, and D
    ErrorSweep(RunArgs),
    /// Wall-clock speedup of the feature pipeline over exact attention
    SpeedSweep(RunArgs),
    /// Unbiasedness z-scores for kernel estimates and attention numerators
    Unbiasedness(RunArgs),
    /// Empirical exceedance probabilities against the concentration bound
    TailBound(RunArgs),
    /// Small end-to-end tour: errors, restoration diagnostics, parameter fit
    Demo(RunArgs),
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::ErrorSweep(a) => (Experiment::ErrorSweep, a),
            Command::SpeedSweep(a) => (Experiment::SpeedSweep, a),
            Command::Unbiasedness(a) => (Experiment::Unbiasedness, a),
            Command::TailBound(a) => (Experiment::TailBound, a),
            Command::Demo(a) => (Experiment::Demo, a),
        }
    }
}

/// Flags mirror the config file keys; anything given here overrides the file.
#[derive(Args)]
struct RunArgs {
    /// Config file (flat JSON document)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Kernel to include: exp, inv, logi, trigh, sqrt (repeatable or comma-separated)
    #[arg(long = "kernel", value_delimiter = ',')]
    kernels: Vec<KernelId>,
    /// Sequence lengths n
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Input dimensions d
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    /// Random-feature dimensions D
    #[arg(long = "D", value_delimiter = ',')]
    feature_dims: Vec<usize>,
    /// Degree-law base p (must exceed 1)
    #[arg(long)]
    p: Option<f64>,
    /// Trials / repetitions / sampled maps, depending on the experiment
    #[arg(long)]
    trials: Option<usize>,
    /// Seed for all random draws
    #[arg(long)]
    seed: Option<u64>,
    /// Normalization guard epsilon
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output path; omitted means stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit JSON; with --out, writes a .json mirror next to the CSV
    #[arg(long)]
    json: bool,
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = run_command(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run_command(command: Command) -> schoenbat::Result<()> {
    let (experiment, args) = command.split();
    let mut cfg = match &args.config {
        Some(path) => parse_config_for(path, experiment)?,
        None => ExperimentConfig::new(experiment),
    };
    if !args.kernels.is_empty() {
        cfg.kernels = args.kernels.clone();
    }
    if !args.n.is_empty() {
        cfg.n_values = args.n.clone();
    }
    if !args.d.is_empty() {
        cfg.d_values = args.d.clone();
    }
    if !args.feature_dims.is_empty() {
        cfg.feature_dims = args.feature_dims.clone();
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(epsilon) = args.epsilon {
        cfg.epsilon = epsilon;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    cfg.validate()?;
    let records = run(&cfg)?;
    match &cfg.out {
        Some(path) => {
            schoenbat::harness::write_csv(&cfg, &records, path)?;
            log::info!("wrote {} records to {}", records.len(), path.display());
            if args.json {
                let mirror = path.with_extension("json");
                std::fs::write(&mirror, emit_json(&cfg, &records))?;
                log::info!("wrote JSON mirror to {}", mirror.display());
            }
        }
        None => {
            if args.json {
                print!("{}", emit_json(&cfg, &records));
            } else {
                print!("{}", emit_csv(&cfg, &records));
            }
        }
    }
    Ok(())
}
