mod commands;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BuildArgs, CounterexampleArgs, DecomposeArgs, ExportArgs, VerifyArgs};

/// Construct, check and use the Lipschitz inner function of the Kolmogorov
/// superposition theorem.
#[derive(Parser)]
#[command(name = "kolmo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refine towns level by level and write one state file per level.
    Build(BuildArgs),
    /// Check built levels; exits 1 when any check fails.
    Verify(VerifyArgs),
    /// Write ψ samples, exact knots, or SVG figures.
    Export(ExportArgs),
    /// Run outer rounds for a named test function.
    Decompose(DecomposeArgs),
    /// Show the linear candidate passing every grid check yet colliding in the limit.
    Counterexample(CounterexampleArgs),
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Some verification failed.
    Check(String),
    /// Bad arguments, unreadable or malformed input.
    Usage(String),
    /// The construction itself failed.
    Builder(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Builder(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Check(m) | CliError::Usage(m) | CliError::Builder(m) => m,
        }
    }
}

impl From<kolmo_core::Error> for CliError {
    fn from(e: kolmo_core::Error) -> Self {
        use kolmo_core::Error as E;
        match e {
            E::Parse(_) | E::InvalidParameter(_) | E::ShiftOutOfRange { .. } | E::InvalidState(_) | E::Json(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Builder(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => commands::build(a),
        Command::Verify(a) => commands::verify(a),
        Command::Export(a) => commands::export(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Counterexample(a) => commands::counterexample(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
