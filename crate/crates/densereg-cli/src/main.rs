//! Command-line front end for the dense feed-forward regression library.
//!
//! Subcommands: `generate` (synthetic CSVs), `train` (fit one network and
//! write a checkpoint), `sweep` (depth series), `bench` (compare against
//! classical baselines), `eval` (metrics from a checkpoint), and `predict`
//! (append predictions to feature rows).
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data or I/O
//! error, 4 numeric failure, 5 checkpoint integrity error.

mod artifacts;
mod commands;
mod config;
mod errors;
mod pipeline;

use clap::{Parser, Subcommand};

use crate::errors::CmdResult;

#[derive(Parser)]
#[command(name = "densereg", version, about = "Dense feed-forward regression models and baselines")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Write a synthetic dataset to CSV
    Generate(commands::generate::GenerateArgs),
    /// Train one network and save a checkpoint
    Train(commands::train::TrainArgs),
    /// Train a series of network depths and tabulate losses
    Sweep(commands::sweep::SweepArgs),
    /// Compare networks against linear, penalized, and tree baselines
    Bench(commands::bench::BenchArgs),
    /// Score a checkpoint against a labeled dataset
    Eval(commands::eval::EvalArgs),
    /// Run a checkpoint over feature rows and write predictions
    Predict(commands::predict::PredictArgs),
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Commands::Generate(args) => commands::generate::run(args),
        Commands::Train(args) => commands::train::run(args),
        Commands::Sweep(args) => commands::sweep::run(args),
        Commands::Bench(args) => commands::bench::run(args),
        Commands::Eval(args) => commands::eval::run(args),
        Commands::Predict(args) => commands::predict::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {}", err.message);
        std::process::exit(err.code);
    }
}
