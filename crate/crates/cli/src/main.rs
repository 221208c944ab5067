//! `fedpandemic` — validate inputs, run federated simulations, sweep noise
//! settings and summarize the results.
//!
//! Exit status: 0 on success, 1 for invalid configuration or inputs, 2 for
//! filesystem failures.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigLayer, SweepLayer};

#[derive(Debug, Parser)]
#[command(name = "fedpandemic", version, about = "Federated symptom-classifier simulations with survey noise")]
struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Log progress (repeat for more detail). RUST_LOG also works.
    #[arg(long, short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load embeddings, surveys and corpus and check that every term is embeddable.
    Validate {
        #[command(flatten)]
        flags: ConfigLayer,
    },
    /// Run one federated simulation and write its artifacts.
    Run {
        #[command(flatten)]
        flags: ConfigLayer,
    },
    /// Run a noise-level or epsilon sweep over several seeds.
    Sweep {
        #[command(flatten)]
        flags: ConfigLayer,
        #[command(flatten)]
        sweep: SweepLayer,
    },
    /// Print the accuracy table of an existing output directory or accuracy CSV.
    Report {
        /// Output directory (containing accuracy.csv) or a CSV file.
        input: PathBuf,
        /// Global epoch to report (default: the last one in the file).
        #[arg(long)]
        epoch: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn dispatch(cli: Cli) -> fedpandemic::Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigLayer::load(path)?,
        None => ConfigLayer::default(),
    };
    match cli.command {
        Command::Validate { flags } => commands::validate(file.overlay(flags)),
        Command::Run { flags } => commands::run(file.overlay(flags)),
        Command::Sweep { flags, sweep } => {
            let file_sweep = file.sweep.clone().unwrap_or_default();
            commands::sweep(file.overlay(flags), file_sweep.overlay(sweep))
        }
        Command::Report { input, epoch } => commands::report(&input, epoch.or(file.epoch)),
    }
}
