//! Command-line pipeline for analyzing power and gender in an email corpus:
//! name statistics, participant gender resolution, corpus subsetting,
//! hierarchy-labeled pair extraction, dialog-structure features, factorial
//! statistics, and power-direction classification.
//!
//! Every command is deterministic for a given seed and inputs, writes its
//! artifacts atomically, and can be rerun to byte-identical outputs.

mod commands;
mod config;
mod featurize;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ablate, analyze, eval, features, gender, pairs, ssa, subset, train};
use config::ConfigMap;

#[derive(Parser, Debug)]
#[command(
    name = "orgmail",
    version,
    about = "Email-corpus power and gender analysis pipeline"
)]
struct Cli {
    /// Seed for every randomized step (split hashing, solver sweeps).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// JSON file with fallback values for flags not given on the command
    /// line; explicit flags always win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the name-statistics table from per-year birth-name counts.
    SsaBuild(ssa::SsaBuildArgs),
    /// Resolve a gender for every corpus participant.
    GenderAssign(gender::GenderAssignArgs),
    /// Keep only threads whose participants have resolved genders.
    Subset(subset::SubsetArgs),
    /// Extract interacting pairs and label the hierarchy-related ones.
    Pairs(pairs::PairsArgs),
    /// Compute per-pair features and the train/dev/test split.
    Features(features::FeaturesArgs),
    /// Run the factorial statistics over the structural features.
    Analyze(analyze::AnalyzeArgs),
    /// Train the power-direction classifier.
    Train(train::TrainArgs),
    /// Score a trained model on one split.
    Eval(eval::EvalArgs),
    /// Compare feature-family combinations end to end.
    Ablate(ablate::AblateArgs),
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let cfg = ConfigMap::load(cli.config.as_deref())?;
    match cli.command {
        Command::SsaBuild(args) => ssa::run(args, &cfg),
        Command::GenderAssign(args) => gender::run(args, &cfg),
        Command::Subset(args) => subset::run(args, &cfg),
        Command::Pairs(args) => pairs::run(args, &cfg),
        Command::Features(args) => features::run(args, cli.seed, &cfg),
        Command::Analyze(args) => analyze::run(args, &cfg),
        Command::Train(args) => train::run(args, cli.seed, &cfg),
        Command::Eval(args) => eval::run(args, &cfg),
        Command::Ablate(args) => ablate::run(args, cli.seed, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
