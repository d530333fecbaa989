//! Command-line front end: argument definitions, dispatch, and exit codes.

mod commands;
pub mod io;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bilevel::BilevelError;
use crate::farkas::FarkasError;
use crate::lowerlevel::LowerError;
use crate::sos::SosError;
use crate::uncertainty::UncertaintyError;

pub use commands::{certify, check_farkas, check_feasible, check_lower, solve};
pub use report::{LevelValue, RunReport, Timings};

pub const EXIT_OK: i32 = 0;
/// Malformed input, bad arguments, or unsupported problem class.
pub const EXIT_INPUT: i32 = 2;
/// A solver could not decide.
pub const EXIT_INDETERMINATE: i32 = 3;
/// Hypotheses of the convergence result fail and `--force` was not given.
pub const EXIT_HYPOTHESES: i32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("solver indeterminate: {0}")]
    Indeterminate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_INPUT,
            CliError::Indeterminate(_) => EXIT_INDETERMINATE,
        }
    }

    fn status(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "input_error",
            CliError::Indeterminate(_) => "indeterminate",
        }
    }
}

impl From<FarkasError> for CliError {
    fn from(e: FarkasError) -> Self {
        match e {
            FarkasError::Indeterminate(_) => CliError::Indeterminate(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<LowerError> for CliError {
    fn from(e: LowerError) -> Self {
        match e {
            LowerError::Indeterminate(_) => CliError::Indeterminate(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<UncertaintyError> for CliError {
    fn from(e: UncertaintyError) -> Self {
        match e {
            UncertaintyError::Solver(_) => CliError::Indeterminate(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<BilevelError> for CliError {
    fn from(e: BilevelError) -> Self {
        match e {
            BilevelError::Lower(l) => l.into(),
            BilevelError::Uncertainty(u) => u.into(),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<SosError> for CliError {
    fn from(e: SosError) -> Self {
        match e {
            SosError::Bilevel(b) => b.into(),
            SosError::Conic(_) | SosError::Io(_) => CliError::Indeterminate(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rbsos",
    version,
    about = "Robust bilevel polynomial optimization with sums-of-squares relaxations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search a Farkas certificate for a robust linear implication.
    CheckFarkas(FarkasArgs),
    /// Solve the relaxation hierarchy of a bilevel problem.
    Solve(SolveArgs),
    /// Decide robust feasibility of a point.
    CheckFeasible(PointArgs),
    /// Decide whether y is a robust lower-level solution at x.
    CheckLower(PointArgs),
    /// Search a global optimality certificate at a point.
    Certify(CertifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckFarkas(_) => "check-farkas",
            Command::Solve(_) => "solve",
            Command::CheckFeasible(_) => "check-feasible",
            Command::CheckLower(_) => "check-lower",
            Command::Certify(_) => "certify",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FarkasArgs {
    /// Farkas system file (JSON).
    pub file: PathBuf,
    /// Coefficients of the tested inequality `p^T x >= r`; overrides the file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Option<Vec<f64>>,
    /// Right-hand side of the tested inequality; overrides the file.
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    /// Number of samples for the implication check.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    /// Problem file (JSON).
    pub file: PathBuf,
    /// Upper-level point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Lower-level point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Smallest relaxation degree (rounded up to even).
    #[arg(long)]
    pub kmin: Option<u32>,
    /// Largest relaxation degree (rounded up to even).
    #[arg(long)]
    pub kmax: Option<u32>,
    /// Level bound; defaults to the objective at the feasible point.
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Run even when the hypotheses of the convergence result fail.
    #[arg(long)]
    pub force: bool,
    /// Write each level's conic program and multipliers to this directory.
    #[arg(long)]
    pub dump_sdp: Option<PathBuf>,
    /// Solve levels one after another instead of in parallel.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Relaxation degree (rounded up to even).
    #[arg(long, default_value_t = 4)]
    pub k: u32,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

/// Runs a command and returns its report and exit code.
pub fn run(cli: &Cli) -> (RunReport, i32) {
    let start = std::time::Instant::now();
    let result = match &cli.command {
        Command::CheckFarkas(a) => check_farkas(a),
        Command::Solve(a) => solve(a),
        Command::CheckFeasible(a) => check_feasible(a),
        Command::CheckLower(a) => check_lower(a),
        Command::Certify(a) => certify(a),
    };
    let (mut report, code) = match result {
        Ok(out) => out,
        Err(e) => {
            let mut r = RunReport::new(cli.command.name());
            r.status = e.status().into();
            r.summary = e.to_string();
            (r, e.exit_code())
        }
    };
    report.timings.total_seconds = start.elapsed().as_secs_f64();
    (report, code)
}
