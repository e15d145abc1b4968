use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{context}: {source}")]
    Core { context: String, source: mrca_core::Error },
    #[error("{0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } | CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Core { source, .. } => match source {
                mrca_core::Error::NonFinite { .. } => 3,
                mrca_core::Error::InvalidConfig(_) => 1,
                _ => 2,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn core(context: impl Into<String>) -> impl FnOnce(mrca_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }
}
