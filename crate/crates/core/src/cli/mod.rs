//! Command-line surface: `exact`, `verify`, `attack` and `bench` over CSV
//! inputs, with JSON reports.
//!
//! Exit codes: 0 success, 2 configuration, 3 input/output, 4 solver failure,
//! 5 certification violation.

mod args;
mod report;
mod run;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, CliCommand, Command, MethodArg, NormArg, RunArgs, RunConfig};
pub use report::{
    round_sig, Aggregates, BenchReport, BenchRow, QueryRecord, RobustnessReport, SearchProfile, SCHEMA_VERSION,
};
pub use run::{evaluate, run, run_bench, run_report, select_queries, Method};

use crate::error::Error;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::RaggedRow { .. } | Error::InvalidDataset(_) => 3,
        Error::CertificationViolation(_) => 5,
        Error::Config(_)
        | Error::InvalidK { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyClass(_)
        | Error::InsufficientPoints { .. }
        | Error::SameClassTarget(_)
        | Error::MixedTargetLabels
        | Error::InvalidExclusion(_)
        | Error::OracleTooLarge { .. } => 2,
        Error::DegeneratePair { .. }
        | Error::NonFinite
        | Error::OracleInfeasible
        | Error::NoFeasibleTarget { .. }
        | Error::NoFlip
        | Error::NotConverged { .. }
        | Error::LpInfeasible
        | Error::LpUnbounded
        | Error::LpIterationLimit => 4,
    }
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Diagnostics go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, raw) = match cli.command {
        CliCommand::Exact(a) => (Command::Exact, a),
        CliCommand::Verify(a) => (Command::Verify, a),
        CliCommand::Attack(a) => (Command::Attack, a),
        CliCommand::Bench(a) => (Command::Bench, a),
    };
    match RunConfig::from_args(command, raw).and_then(|cfg| run(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
