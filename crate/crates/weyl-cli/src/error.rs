use std::path::PathBuf;

use thiserror::Error;
use weyl_core::WeylError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error("usage: {0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl CliError {
    /// 1 for failed numerical checks, 2 for unusable input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Weyl(e) => match e {
                WeylError::ObstructionNonzero(_)
                | WeylError::BoundViolation { .. }
                | WeylError::UnboundedTrend { .. }
                | WeylError::NotClosed(_)
                | WeylError::SlicesDisagree(_)
                | WeylError::IllConditioned(_)
                | WeylError::DivisionNearZero { .. } => 1,
                _ => 2,
            },
            _ => 2,
        }
    }
}
