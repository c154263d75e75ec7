// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};

/// Errors of the IO layer and CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] circuitscope_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Exit status for a failed command.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

impl Error {
    pub fn format(path: &Path, msg: impl Into<String>) -> Self {
        Error::Format { path: path.to_path_buf(), msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        use circuitscope_core::Error as C;
        match self {
            Error::Core(C::NonFinite { .. } | C::Training { .. } | C::InsufficientData { .. } | C::Undefined(_)) => {
                EXIT_NUMERIC
            }
            _ => EXIT_CONFIG,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}

impl<T> IoContext<T> for serde_json::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| Error::format(path, e.to_string()))
    }
}

impl<T> IoContext<T> for csv::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| Error::format(path, e.to_string()))
    }
}
