use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs outside a function's mathematical domain (NaN, non-positive mean, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Forward filter produced an all-zero or non-finite row.
    #[error("numerical degeneracy in forward filter at area {area}, time {time}")]
    Degenerate { area: usize, time: usize },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("initialization failed: {0}")]
    Init(String),

    #[error("draw file format: {0}")]
    Format(String),

    #[error("insufficient draws: {0}")]
    Draws(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable, machine-readable category printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Contract(_) => "contract",
            Error::Degenerate { .. } => "degenerate",
            Error::Data(_) | Error::Parse { .. } | Error::Csv(_) => "data",
            Error::Config(_) => "config",
            Error::Init(_) => "init",
            Error::Format(_) => "format",
            Error::Draws(_) => "draws",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Parse { .. } | Error::Csv(_) => 3,
            Error::Io(_) => 4,
            Error::Format(_) => 5,
            _ => 1,
        }
    }
}
