use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod config;
mod output;
mod run;
mod verify;

use config::Config;

/// Stationary profiles of the small-variance infinitesimal model.
#[derive(Parser)]
#[command(name = "infmodel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file with [model], [discretization], [solver], [march], [sweep].
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Picard solve at one eps; writes solution.json, U.csv and F.csv.
    Stationary,
    /// Time march from one or more Gaussian initial data.
    March,
    /// Sweep eps and compare with the eps -> 0 limit; writes converge.csv.
    Converge,
    /// Run the invariant suite and print one PASS/FAIL line per check.
    Verify,
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("setting up the thread pool")?;
    }
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Stationary => run::stationary(&cfg, &cli.out),
        Command::March => run::march(&cfg, &cli.out),
        Command::Converge => run::converge(&cfg, &cli.out),
        Command::Verify => verify::verify(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
