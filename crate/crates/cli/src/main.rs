//! `moment-eq`: solve moment equilibria, estimate value distributions from
//! bids, and run out-of-sample comparisons on auction data.

mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "moment-eq", version, about)]
struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true, env = "MOMENT_EQ_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a moment equilibrium for a value or cost distribution.
    Solve(commands::solve::Args),
    /// Estimate beliefs and pseudo-values from observed bids.
    Estimate(commands::estimate::Args),
    /// Homogenize bid data and compare out-of-sample predictions.
    Pipeline(commands::pipeline::Args),
    /// Generate a synthetic bid data set with known ground truth.
    Simulate(commands::simulate::Args),
    /// Compare closed-form worst-case losses with a brute-force search.
    Oracle(commands::oracle::Args),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::input("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Solve(a) => commands::solve::run(a),
        Command::Estimate(a) => commands::estimate::run(a),
        Command::Pipeline(a) => commands::pipeline::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Oracle(a) => commands::oracle::run(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("moment-eq: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
