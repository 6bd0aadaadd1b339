use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit status: 1 config, 2 data (and I/O), 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<sntg_core::Error> for CliError {
    fn from(e: sntg_core::Error) -> Self {
        use sntg_core::Error as E;
        match e {
            E::NonFinite(_) => CliError::Numeric(e.to_string()),
            E::Io(_)
            | E::BadMagic { .. }
            | E::Truncated { .. }
            | E::CountMismatch { .. }
            | E::Checkpoint(_) => CliError::Data(e.to_string()),
            E::InsufficientSamples(_) => CliError::Data(e.to_string()),
            E::ShapeMismatch { .. } | E::InvalidArgument(_) | E::MissingIntermediates => {
                CliError::Config(e.to_string())
            }
        }
    }
}
