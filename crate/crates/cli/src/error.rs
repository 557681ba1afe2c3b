use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] cvqkd_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> ExitCode {
        use cvqkd_core::Error as E;
        match self {
            CliError::Core(E::NonConvergence(_)) => ExitCode::from(3),
            CliError::Config(_) | CliError::Core(_) => ExitCode::from(2),
            CliError::Io { .. } => ExitCode::FAILURE,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
