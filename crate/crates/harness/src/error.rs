// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const STRICT: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("data: {0}")]
    Data(String),
    #[error("strict mode: {0}")]
    Strict(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => exit::CONFIG,
            Error::Io { .. } | Error::Parse { .. } | Error::Data(_) => exit::DATA,
            Error::Strict(_) => exit::STRICT,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
