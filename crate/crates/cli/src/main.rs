//! Command-line driver: reads a TOML experiment, runs it, writes CSV, JSON and SVG.
//!
//! Exit status is 0 on success, 2 for configuration problems (including a
//! missing dataset) and 1 for anything that goes wrong while running.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use crate::config::{Config, ConfigError};

#[derive(Debug, Parser)]
#[command(
    name = "fedbandit",
    version,
    about = "Federated adversarial bandit simulations"
)]
struct Args {
    /// Experiment description in TOML.
    config: PathBuf,
    /// Master seed; overrides `simulation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs; overrides `simulation.runs`.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory; overrides `output`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Worker threads for the parallel executor.
    #[arg(long)]
    workers: Option<usize>,
    /// Validate the config and exit.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                eprintln!("error: {c}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(args: Args) -> anyhow::Result<()> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.simulation.seed = s;
    }
    if let Some(r) = args.runs {
        cfg.simulation.runs = r;
    }
    cfg.check()?;
    if args.check {
        println!("{}: ok", args.config.display());
        return Ok(());
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(ConfigError::new("--workers", "must be positive").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("starting worker pool")?;
    }
    let out = args
        .output
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("fedbandit-out"));
    let outcomes = run::execute(&cfg, &out)?;
    for o in &outcomes {
        println!(
            "{:<24} final average regret {:.4} (sd {:.4})",
            o.label, o.final_mean, o.final_sd
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
