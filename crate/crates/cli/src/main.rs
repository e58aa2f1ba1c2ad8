//! `tropiq`: soft query answering over uncertain knowledge graphs.
//!
//! Subcommands: `build-dataset`, `answer`, `calibrate`, `train-scorer`,
//! `evaluate`, `oracle-check`. Every command is deterministic given its
//! configuration and seed; errors are emitted as JSON on stderr with a
//! distinct exit code per failure class.

mod commands;
mod config;
mod errors;

use clap::Parser;

#[derive(Parser)]
#[command(name = "tropiq", version, about = "Soft query answering over uncertain knowledge graphs")]
enum Cli {
    /// Sample and serialize a query dataset from an uncertain KG.
    BuildDataset(commands::build_dataset::Args),
    /// Answer queries and emit a predictions TSV.
    Answer(commands::answer::Args),
    /// Train the affine confidence calibration on alpha = 0 queries.
    Calibrate(commands::calibrate::Args),
    /// Train the minimal embedding scorer on the train split.
    TrainScorer(commands::train_scorer::Args),
    /// Score predictions against dataset records with ranking metrics.
    Evaluate(commands::evaluate::Args),
    /// Cross-check the engine against the brute-force evaluator on random
    /// inputs.
    OracleCheck(commands::oracle_check::Args),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli {
        Cli::BuildDataset(args) => commands::build_dataset::run(args),
        Cli::Answer(args) => commands::answer::run(args),
        Cli::Calibrate(args) => commands::calibrate::run(args),
        Cli::TrainScorer(args) => commands::train_scorer::run(args),
        Cli::Evaluate(args) => commands::evaluate::run(args),
        Cli::OracleCheck(args) => commands::oracle_check::run(args),
    };
    if let Err(err) = result {
        eprintln!("{}", err.to_json());
        std::process::exit(err.code.exit_code());
    }
}
