use std::fmt;

use moment_eq::Error;

/// Process exit codes.
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_INVARIANT: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, files or data.
    Input(String),
    /// A numerical routine failed to converge.
    Solver(String),
    /// An output violated a guarantee the library is supposed to uphold.
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    /// Library error with extra context prefixed.
    pub fn context(ctx: impl fmt::Display, e: Error) -> Self {
        match CliError::from(e) {
            CliError::Input(m) => CliError::Input(format!("{ctx}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("{ctx}: {m}")),
            CliError::Invariant(m) => CliError::Invariant(format!("{ctx}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SolverFailure { .. } | Error::DensityUnderflow { .. } => {
                CliError::Solver(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
