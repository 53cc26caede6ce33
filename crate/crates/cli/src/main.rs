//! `hmvp`: command-line front end for the Heisenberg mean-value laboratory.
//!
//! Every subcommand prints a final `STATUS=PASS` or `STATUS=FAIL` line and
//! exits with code 0 exactly when all requested checks pass.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const SUBCOMMANDS: [&str; 7] = ["constants", "volume", "average", "extrema", "residual", "classify", "solve"];

#[derive(Debug, Parser)]
#[command(name = "hmvp", version, about = "Mean-value expansions and p-harmonic functions on the Heisenberg group")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Significant digits for floating output.
    #[arg(long, global = true, default_value_t = 12, value_parser = clap::value_parser!(u16).range(1..=17))]
    pub precision: u16,

    /// Write the CSV table to this file instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed for low-discrepancy sampling and extremum seeding.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Read `key=value` options from a file; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean-value constant C(n) from all sources and alpha, beta for one.
    Constants(commands::ConstantsArgs),
    /// Gauge-ball volume, optionally checked by indicator integration.
    Volume(commands::VolumeArgs),
    /// Average of a field over a gauge ball.
    Average(commands::AverageArgs),
    /// Scaled extrema positions across shrinking radii.
    Extrema(commands::ExtremaArgs),
    /// Mean-value residual table and its extrapolated limit.
    Residual(commands::ResidualArgs),
    /// Decide p-harmonicity of a field on sample points.
    Classify(commands::ClassifyArgs),
    /// Lattice Dirichlet solver (n = 1).
    Solve(commands::SolveArgs),
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("HMVP_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("HMVP_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            anyhow::bail!("HMVP_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args().collect(), &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            println!("STATUS=FAIL");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let run = configure_threads().and_then(|_| commands::run(&cli));
    match run {
        Ok(true) => {
            println!("STATUS=PASS");
            ExitCode::SUCCESS
        }
        Ok(false) => {
            println!("STATUS=FAIL");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            println!("STATUS=FAIL");
            ExitCode::FAILURE
        }
    }
}
