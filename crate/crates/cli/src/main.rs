//! `credsel`: simulate data, tune priors, fit and select, score orderings and
//! rerun the simulation tables from one flat configuration.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "credsel", version, about = "Bayesian variable selection through penalized credible regions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write simulated datasets and their true coefficients.
    Simulate(Common),
    /// Pick a prior hyperparameter by matching the induced R² distribution.
    Tune(Common),
    /// Sample a posterior, solve the credible-region path and select by BIC.
    FitSelect(Common),
    /// Score an ordering against a truth file.
    Evaluate(Common),
    /// Rerun one of the simulation tables t1..t5.
    Reproduce(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// KEY=VALUE overrides applied after the config file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn resolve(name: &str, c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(name);
    if let Some(path) = &c.config {
        cfg.load_file(path)?;
    }
    for pair in &c.overrides {
        cfg.apply_pair(pair, "argument")?;
    }
    if let Some(s) = c.seed {
        cfg.set("seed", &s.to_string(), "--seed")?;
    }
    if let Some(j) = c.jobs {
        cfg.set("jobs", &j.to_string(), "--jobs")?;
    }
    if let Some(o) = &c.out {
        cfg.set("out", &o.display().to_string(), "--out")?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Tune(c) => ("tune", c),
        Command::FitSelect(c) => ("fit-select", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Reproduce(c) => ("reproduce", c),
    };
    let outcome = resolve(name, common).and_then(|cfg| {
        let jobs: usize = cfg.get("jobs")?;
        if jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
                .context("cannot start worker pool")?;
        }
        commands::run(&cfg)
    });
    match outcome {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{} replicate(s) failed:", failures.len());
            eprintln!("{:<10} {:<22} error", "replicate", "unit");
            for f in &failures {
                eprintln!("{:<10} {:<22} {}", f.replicate, f.label, f.message);
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
