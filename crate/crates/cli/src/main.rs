//! Command-line front end for common-trend analysis: panel ingestion, trend
//! counting, attractor-space hypothesis tests, critical-value caching, Monte
//! Carlo studies, and the exact one-trend limit law.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

mod commands;
mod error;
mod ingest;
mod report;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, CritvalArgs, DistArgs, HypothesisArgs, McArgs};

#[derive(Parser)]
#[command(
    name = "cotrend",
    version,
    about = "Common-trend analysis of I(1) panels via canonical correlations against a sine basis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the number of common trends in a delimited panel.
    Analyze(AnalyzeArgs),
    /// Fill or extend a critical-value cache file.
    Critval(CritvalArgs),
    /// Test an attractor-space restriction on a panel.
    Hypothesis(HypothesisArgs),
    /// Monte Carlo study of selection rules and hypothesis tests.
    Mc(McArgs),
    /// Evaluate the exact one-trend limit law.
    Dist(DistArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    let run = match cli.command {
        Command::Analyze(args) => commands::run_analyze(args),
        Command::Critval(args) => commands::run_critval(args),
        Command::Hypothesis(args) => commands::run_hypothesis(args),
        Command::Mc(args) => commands::run_mc(args),
        Command::Dist(args) => commands::run_dist(args),
    };
    if let Err(err) = run {
        eprintln!("error: {err}");
        std::process::exit(err.code());
    }
}
