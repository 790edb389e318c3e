use std::path::{Path, PathBuf};

use gluing_core::GluingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: GluingError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("writing {path}: {reason}")]
    Output { path: PathBuf, reason: String },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 validation, 3 convergence, 4 assumption violation, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Output { .. } => 1,
            CliError::Core { source, .. } => match source {
                GluingError::InvalidParameter { .. }
                | GluingError::DimensionMismatch(_)
                | GluingError::Resolution(_)
                | GluingError::Precondition(_)
                | GluingError::Support(_) => 2,
                GluingError::NoContraction { .. }
                | GluingError::NotConverged { .. }
                | GluingError::SignSearch(_)
                | GluingError::Degenerate(_)
                | GluingError::Domain { .. } => 3,
                GluingError::Assumption(_) => 4,
            },
        }
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for gluing_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}
