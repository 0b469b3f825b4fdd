//! `blocktime` command-line driver.
//!
//! Data goes to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 1 usage, 2 I/O, 3 invalid input.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "blocktime", version, about = "Basic-block throughput estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Gen(commands::GenArgs),
    /// Build a vocabulary and report grammar conformance.
    Tokenize(commands::TokenizeArgs),
    /// Train a model and write a checkpoint.
    Train(commands::TrainArgs),
    /// Predict cycles for 100 iterations of one block.
    Predict(commands::PredictArgs),
    /// Evaluate a checkpoint on a labeled file.
    Eval(commands::EvalArgs),
    /// Compare external predictors (and optionally a checkpoint).
    Compare(commands::CompareArgs),
    /// Measure prediction speed in instructions per second.
    Bench(commands::BenchArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Tokenize(a) => commands::tokenize(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::Compare(a) => commands::compare(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
