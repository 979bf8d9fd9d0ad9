//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity left its physically meaningful domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A density matrix failed its validity checks.
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    /// A time outside the trajectory's domain was requested.
    #[error("time {t} outside trajectory domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },

    /// A synthesized field became non-finite.
    #[error("field singularity on path {path_id} at t = {t}: {detail}")]
    Singularity {
        path_id: u64,
        t: f64,
        detail: String,
    },

    /// The sampling grid is too coarse to track the coherence phase.
    #[error("phase resolution error: {0}")]
    Resolution(String),

    /// A tabulated trajectory file is malformed.
    #[error("trajectory file {file}, row {row}: {msg}")]
    TrajectoryFile {
        file: String,
        row: usize,
        msg: String,
    },

    /// Mismatched grids or otherwise inconsistent arguments.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable process exit code for the CLI: 0 pass, 1 domain/validation, 2 usage/parse.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Json(_) => 2,
            _ => 1,
        }
    }
}
