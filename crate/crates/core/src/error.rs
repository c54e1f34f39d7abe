//! Error type shared across the engine.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file (CSV, edge list, filter image, manifest).
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A value does not fit the 64-bit integer domain.
    #[error("{path}:{line}: integer out of range: {value}")]
    Range {
        path: PathBuf,
        line: usize,
        value: String,
    },

    /// Unknown table/attribute, arity mismatch and friends.
    #[error("schema error: {0}")]
    Schema(String),

    /// Join graph does not match the declared topology.
    #[error("structure error: {0}")]
    Structure(String),

    /// Invalid parameter or out-of-domain input.
    #[error("parameter error: {0}")]
    Param(String),

    /// Caller violated an operation contract (e.g. sieve built for a
    /// different query).
    #[error("contract error: {0}")]
    Contract(String),

    /// A sieve references table state that no longer exists.
    #[error("stale sieve: {0}")]
    Stale(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Engines disagree on a result; always a bug, never tolerated.
    #[error("correctness failure: {0}")]
    Correctness(String),

    /// Corrupt or incompatible binary filter / manifest data.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Process exit code for the CLI: 2 for usage/parameter problems,
    /// 3 for correctness failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_)
            | Error::Structure(_)
            | Error::Param(_)
            | Error::Contract(_)
            | Error::Parse { .. }
            | Error::Range { .. } => 2,
            Error::Correctness(_) => 3,
            _ => 1,
        }
    }
}
