use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{0}")]
    Core(#[from] edgescatter::Error),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use edgescatter::Error as E;
        match self {
            CliError::Config(_) | CliError::Read { .. } => 2,
            CliError::Core(
                E::InvalidInput(_)
                | E::UnknownStrategy { .. }
                | E::WindowHitsCritical { .. }
                | E::NonRectangularGrid(_)
                | E::NonFiniteSample(_)
                | E::IndexOutOfRange { .. },
            ) => 2,
            CliError::Core(_) | CliError::Write { .. } | CliError::Serialize(_) => 3,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}
