//! `mixlab`: configuration-driven experiments on Markov chain mixing and
//! concentration.
//!
//! Every subcommand reads a JSON experiment config (see the README for the
//! schema), runs one experiment, and writes CSV tables plus a JSON report
//! into the output directory. Exit status: 0 for success or a "consistent"
//! verdict, 2 for an "inconsistent" verdict, 1 for errors.

mod config;
mod report;
mod run;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use config::{Experiment, ExperimentConfig};
use report::RunVerdict;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mixlab",
    version,
    about = "A laboratory for Markov chain mixing and concentration of measure"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Replica / sample count (overrides the config).
    #[arg(long)]
    replicas: Option<u64>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides the config; default "mixlab-out").
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact distance-to-stationarity curve and mixing time.
    Mix(CommonArgs),
    /// Empirical tail of a Lipschitz observable against a closed-form bound.
    Conc(CommonArgs),
    /// Contraction profile (exact on enumerated chains, Monte Carlo otherwise).
    Profile(CommonArgs),
    /// Integrate the supermarket fluid ODE and compare to its fixed point.
    Ode(CommonArgs),
    /// Stationary max-queue histogram and two-point check.
    Maxq(CommonArgs),
    /// Empirical chaoticity (joint-vs-product TV) of two queues.
    Chaos(CommonArgs),
    /// Mixing scan around the Ising cut-off time.
    Cutoff(CommonArgs),
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Mix(_) => Experiment::Mix,
            Command::Conc(_) => Experiment::Conc,
            Command::Profile(_) => Experiment::Profile,
            Command::Ode(_) => Experiment::Ode,
            Command::Maxq(_) => Experiment::Maxq,
            Command::Chaos(_) => Experiment::Chaos,
            Command::Cutoff(_) => Experiment::Cutoff,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Mix(a)
            | Command::Conc(a)
            | Command::Profile(a)
            | Command::Ode(a)
            | Command::Maxq(a)
            | Command::Chaos(a)
            | Command::Cutoff(a) => a,
        }
    }
}

fn load_config(cmd: &Command) -> Result<(ExperimentConfig, PathBuf)> {
    let args = cmd.args();
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text)
        .with_context(|| format!("config {} violates the schema", args.config.display()))?;
    if config.experiment != cmd.experiment() {
        bail!(
            "config declares experiment \"{}\" but the \"{}\" subcommand was invoked",
            config.experiment.label(),
            cmd.experiment().label()
        );
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(replicas) = args.replicas {
        config.replicas = replicas;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mixlab-out"));
    Ok((config, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();
    if let Some(threads) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("mixlab: failed to configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let (config, out_dir) = match load_config(&cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("mixlab: {e:#}");
            return ExitCode::from(1);
        }
    };
    match run::run(&config, &out_dir) {
        Ok(None) | Ok(Some(RunVerdict::Consistent)) => {
            println!(
                "mixlab: {} experiment finished; outputs in {}",
                config.experiment.label(),
                out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Ok(Some(RunVerdict::Inconsistent)) => {
            println!(
                "mixlab: {} experiment finished with an INCONSISTENT verdict; outputs in {}",
                config.experiment.label(),
                out_dir.display()
            );
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("mixlab: {e:#}");
            ExitCode::from(1)
        }
    }
}
