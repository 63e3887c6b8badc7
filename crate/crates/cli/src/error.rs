use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const VALIDATION: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration value; `location` is a dotted path into the config.
    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    /// One or more validation checks failed; the message names them.
    #[error("validation failed: {0}")]
    ValidationFailed(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),

    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] miub_core::Error),
}

impl CliError {
    pub fn config(location: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config { location: location.into(), message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse(_) | CliError::MissingInput(_) => exit::CONFIG,
            CliError::ValidationFailed(_) => exit::VALIDATION,
            CliError::Core(e) if e.is_numerical() => exit::NUMERICAL,
            _ => exit::FAILURE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::config("seed", "bad").exit_code(), exit::CONFIG);
        assert_eq!(CliError::ValidationFailed("x".into()).exit_code(), exit::VALIDATION);
        let numerical = CliError::Core(miub_core::Error::Numerical("nan".into()));
        assert_eq!(numerical.exit_code(), exit::NUMERICAL);
        let other = CliError::Core(miub_core::Error::Format("row".into()));
        assert_eq!(other.exit_code(), exit::FAILURE);
    }
}
