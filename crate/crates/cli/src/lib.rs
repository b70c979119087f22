//! Command-line front end: `counterport <sweep|counterport|paradox|weakvalues|histories>`.
//!
//! Exit codes: 0 on success, 1 for I/O failures, 2 for invalid input or
//! configuration, 3 when a numerical invariant (conservation, isometry) breaks.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod records;

use config::{CounterportArgs, FileConfig, HistoriesArgs, ParadoxArgs, SweepArgs, WeakValuesArgs};

#[derive(Debug, Parser)]
#[command(name = "counterport", version, about = "Counterfactual qubit transport and nested-interferometer analysis")]
pub struct Cli {
    /// TOML file with one optional table per subcommand; flags override it
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average fidelity over an (M, N) grid; writes CSV, JSON and SVG
    Sweep(SweepArgs),
    /// Transport one qubit and report the joint state after each stage
    Counterport(CounterportArgs),
    /// Weak values and probe signals of the nested interferometer, as a table
    Paradox(ParadoxArgs),
    /// Weak value of every arm at every time-stamp, as CSV
    Weakvalues(WeakValuesArgs),
    /// Consistency and probabilities of history families
    Histories(HistoriesArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] counterport_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Core(e) if e.is_invariant_violation() => 3,
            CliError::Config(_) | CliError::Core(_) => 2,
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Sweep(a) => commands::sweep(&a.resolve(file.sweep)?, out),
        Command::Counterport(a) => commands::counterport(&a.resolve(file.counterport)?, out),
        Command::Paradox(a) => commands::paradox(&a.resolve(file.paradox)?, out),
        Command::Weakvalues(a) => commands::weakvalues(&a.resolve(file.weakvalues)?, out),
        Command::Histories(a) => commands::histories(&a.resolve(file.histories)?, out),
    }
}
