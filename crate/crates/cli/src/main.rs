//! `chanprune`: synth → train → prune → eval → report.
//!
//! Exit codes: 0 success, 2 usage, 3 input or state error, 4 numeric failure.

mod eval;
mod failure;
mod prune;
mod report;
mod run;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use failure::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "chanprune",
    version,
    about = "1D CNN training with L1 channel pruning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic Segment-CSV dataset.
    Synth(synth::SynthArgs),
    /// Clean, split, standardize and train the baseline network.
    Train(train::TrainArgs),
    /// Prune a trained model by L1 kernel scores and retrain it.
    Prune(prune::PruneArgs),
    /// Evaluate a model on its held-out test split.
    Eval(eval::EvalArgs),
    /// Compare a baseline and a pruned evaluation.
    Report(report::ReportArgs),
}

/// Training overrides shared by `train` and `prune`.
#[derive(Args, Debug, Clone, Default)]
pub struct TrainOverrides {
    /// TOML or JSON file overriding training defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth::run(&a),
        Command::Train(a) => train::run(&a),
        Command::Prune(a) => prune::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Report(a) => report::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, msg }) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
