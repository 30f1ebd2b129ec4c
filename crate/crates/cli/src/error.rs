use thiserror::Error;

/// Failures of a run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] heavy_atom::Error),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Invariant(_) => 1,
            Self::Config { .. } => 2,
            Self::Numerical(_) | Self::Io { .. } => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
