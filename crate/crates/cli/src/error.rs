use std::io;

use thiserror::Error;

/// Every failure maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input. Exit code 2.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    /// Bad argument list on the command line. Exit code 2.
    #[error("{0}")]
    Argument(String),
    /// Well-formed input that fails validation. Exit code 3.
    #[error("{0}")]
    Validation(String),
    /// Missing or unreadable experiment configuration. Exit code 4.
    #[error("config: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Argument(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Config(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}
