use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// A config field violates a precondition. `field` is a dotted path.
    #[error("invalid config: {field}: {message}")]
    Validation { field: String, message: String },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] ltvid_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 2 for bad input, 3 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        use ltvid_core::Error as E;
        match self {
            Self::Validation { .. } | Self::Parse { .. } => 2,
            Self::Core(
                E::InvalidParameter(_)
                | E::SingularLattice { .. }
                | E::OffLattice { .. }
                | E::DuplicateSupport { .. }
                | E::InsufficientSamples { .. },
            ) => 2,
            _ => 3,
        }
    }
}
