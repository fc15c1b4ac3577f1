use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration field or flag failed a schema or physical check.
    #[error("invalid `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("cannot parse {file}: {source}")]
    Parse {
        file: PathBuf,
        #[source]
        source: serde_path_to_error::Error<serde_json::Error>,
    },
    #[error("{context}: {source}")]
    Core {
        context: &'static str,
        #[source]
        source: sreels_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("self-test failed: {0} check(s) did not pass")]
    SelfTest(usize),
}

impl CliError {
    pub fn invalid(path: impl Into<String>, message: impl ToString) -> Self {
        CliError::Validation { path: path.into(), message: message.to_string() }
    }

    /// Process exit status: 2 validation, 3 numeric domain, 4 capacity, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } | CliError::Parse { .. } | CliError::Csv { .. } => 2,
            CliError::Core { source: sreels_core::Error::Capacity { .. }, .. } => 4,
            CliError::Core { .. } | CliError::SelfTest(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

/// Attaches module context to a core error.
pub trait CoreContext<T> {
    fn during(self, context: &'static str) -> Result<T, CliError>;
}

impl<T> CoreContext<T> for sreels_core::Result<T> {
    fn during(self, context: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { context, source })
    }
}
