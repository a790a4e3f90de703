//! `rue`: audit the pointwise reliability of a trained regression model.
//!
//! Exit codes: 0 success, 2 input/configuration error, 3 numerical failure.

mod commands;
mod csvio;
mod error;
mod manifest;

use clap::{Parser, Subcommand};

use commands::{audit, benchmark, detect, simulate, train};

#[derive(Parser)]
#[command(
    name = "rue",
    version,
    about = "Post-hoc reliability auditing for regression models via resampling uncertainty estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write a reusable model artifact.
    Train(train::TrainArgs),
    /// Score test points with one uncertainty method.
    Audit(audit::AuditArgs),
    /// Sweep error tolerances and compute per-method detection AUC.
    Detect(detect::DetectArgs),
    /// Run the full multi-split benchmark pipeline.
    Benchmark(benchmark::BenchmarkArgs),
    /// Generate the synthetic task (optionally with illustration CSVs).
    Simulate(simulate::SimulateArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => train::run(args),
        Command::Audit(args) => audit::run(args),
        Command::Detect(args) => detect::run(args),
        Command::Benchmark(args) => benchmark::run(args),
        Command::Simulate(args) => simulate::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
