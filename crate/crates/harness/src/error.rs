use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Core(#[from] pnr_core::Error),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status: 2 configuration, 3 I/O, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use pnr_core::Error as E;
        match self {
            Self::Config(_) | Self::Json { .. } => 2,
            Self::Io { .. } => 3,
            Self::Core(e) => match e {
                E::Config(_) | E::Domain(_) | E::Empty(_) => 2,
                E::Io(_) | E::Csv(_) | E::Format(_) => 3,
                E::NotConverged { .. } | E::Undefined(_) => 4,
            },
        }
    }
}
