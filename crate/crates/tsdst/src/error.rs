use std::path::PathBuf;

/// Failures of a CLI run, split by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input files, schema or configuration (exit 1).
    #[error("{0}")]
    Input(String),

    /// The solver or an evaluation run failed (exit 2).
    #[error("{0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 1,
            CliError::Solver(_) => 2,
        }
    }

    pub fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }

    pub fn solver(e: impl std::fmt::Display) -> Self {
        CliError::Solver(e.to_string())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
