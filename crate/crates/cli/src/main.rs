//! `stockloan` command-line tool.
//!
//! Exit codes: 0 success, 1 verification failure, 2 inadmissible or
//! inconsistent parameters, 64 usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};
use stockloan::StockLoanError;
use thiserror::Error;

pub const EXIT_VERIFICATION: u8 = 1;
pub const EXIT_PARAMETERS: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Params(#[from] StockLoanError),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Params(StockLoanError::Config(_)) => EXIT_USAGE,
            CliError::Params(_) => EXIT_PARAMETERS,
            CliError::Verification(_) => EXIT_VERIFICATION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Characteristic roots and parameter regime.
    Roots,
    /// Contract value at a price.
    Price,
    /// Fair service fee at the initial price.
    Fee,
    /// One-parameter sweep written as CSV.
    Sweep,
    /// Run the verification suite.
    Verify,
}

/// Value above the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// `(L−q)(x/L)^λ₂`.
    Printed,
    /// Immediate redemption for `L − q`.
    ExercisePayoff,
}

#[derive(Debug, Parser)]
#[command(name = "stockloan", version, about = "Perpetual stock loan valuation")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Contract description (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Price at which to evaluate (defaults to s0).
    #[arg(long, value_name = "X", allow_negative_numbers = true)]
    pub at: Option<f64>,
    /// Swept parameter: a, s0, k or L.
    #[arg(long, value_name = "P")]
    pub vary: Option<String>,
    /// Sweep grid as lo:hi:n.
    #[arg(long, value_name = "LO:HI:N")]
    pub range: Option<String>,
    /// Cross-check the price by Monte Carlo.
    #[arg(long)]
    pub verify: bool,
    /// Write machine-readable output (CSV or key=value) to FILE.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Simulation seed; overrides STOCKLOAN_SEED and the file.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Number of simulated paths.
    #[arg(long, value_name = "N")]
    pub paths: Option<usize>,
    /// Simulation time step in years.
    #[arg(long, value_name = "D")]
    pub dt: Option<f64>,
    /// Value above the cap.
    #[arg(long, value_enum, default_value = "printed")]
    pub mode: Mode,
    /// Accept any positive dividend yield regardless of the loan rate.
    #[arg(long)]
    pub permissive: bool,
    /// Skip the Monte Carlo checks in `verify`.
    #[arg(long)]
    pub no_mc: bool,
    /// Scale the solved boundary before verification.
    #[arg(long, hide = true, value_name = "FACTOR")]
    pub perturb_boundary: Option<f64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match commands::run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
