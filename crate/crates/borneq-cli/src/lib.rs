//! Command-line front end: configuration parsing, run orchestration, and
//! report/trace persistence for the Born-Infeld equilibrium solver.

pub mod config;
pub mod manifest;
pub mod output;
pub mod run;

use std::fmt;

/// CLI failure with its process exit code: 2 for validation errors (no
/// files written), 3 for solver non-convergence, 1 for i/o trouble.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Solver(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Solver(m) | CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<borneq_core::Error> for CliError {
    fn from(e: borneq_core::Error) -> Self {
        use borneq_core::Error as E;
        match e {
            E::NotConverged { .. }
            | E::NanDetected { .. }
            | E::UpsilonNotMonotone { .. }
            | E::BracketNotFound(_)
            | E::QuadratureFailure { .. } => CliError::Solver(e.to_string()),
            E::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
