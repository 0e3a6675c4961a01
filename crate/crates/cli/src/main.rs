use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsnet::config::{parse_config_with, TopLevel};
use tsnet::pipeline::{run_pipeline, Stage};
use tsnet::Error;

/// Transition states of Markov jump processes from current graphs and node embeddings.
#[derive(Parser)]
#[command(name = "tsnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary distribution, committors, currents and the current graph.
    Solve(RunArgs),
    /// Everything in `solve`, then random walks and embedding training.
    Embed(RunArgs),
    /// The full pipeline through transition states and clusters.
    Identify(RunArgs),
    /// Same as `identify`.
    Pipeline(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Built-in model name or model file; overrides the configured model.
    #[arg(long)]
    model: Option<String>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_EMPTY: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Parse(_)
        | Error::Validation { .. }
        | Error::UnknownModel(_)
        | Error::MissingModelField { .. }
        | Error::InvalidSpec(_)
        | Error::Expr(_) => EXIT_CONFIG,
        Error::EmptyGraph | Error::EmptyResult(_) | Error::InsufficientPoints { .. } => EXIT_EMPTY,
        _ => EXIT_SOLVER,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, args) = match cli.command {
        Command::Solve(a) => (Stage::Solve, a),
        Command::Embed(a) => (Stage::Embed, a),
        Command::Identify(a) | Command::Pipeline(a) => (Stage::Identify, a),
    };
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => String::new(),
    };
    let top = TopLevel { model: args.model, seed: args.seed, out_dir: args.out_dir };
    let base = args.config.as_deref().and_then(|p| p.parent());
    let cfg = match parse_config_with(&text, base, &top) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_pipeline(&cfg, stage) {
        Ok(run) => {
            println!("wrote {} files to {}", run.files.len(), run.out_dir.display());
            for e in &run.empty_results {
                eprintln!("warning: {e}");
            }
            if run.empty_results.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_EMPTY)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
