use std::fmt;
use std::process::ExitCode;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Config = 2,
    Data = 3,
}

/// An error tagged with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.status as u8)
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub trait Classify<T> {
    /// Marks an error as a configuration problem (exit 2).
    fn config(self, context: impl fmt::Display) -> CliResult<T>;
    /// Marks an error as a data problem (exit 3).
    fn data(self, context: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| Failure {
            status: Status::Config,
            error: e.into().context(context.to_string()),
        })
    }

    fn data(self, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| Failure {
            status: Status::Data,
            error: e.into().context(context.to_string()),
        })
    }
}

pub fn config_error(message: impl fmt::Display) -> Failure {
    Failure {
        status: Status::Config,
        error: anyhow::anyhow!("{message}"),
    }
}
