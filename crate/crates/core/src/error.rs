use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("too few tail points beyond threshold: found {found}, need {needed}")]
    TooFewTailPoints { found: usize, needed: usize },

    #[error("required lags missing: {0:?}")]
    MissingLags(Vec<usize>),

    #[error("malformed row at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("http request failed after {attempts} attempts (last status: {last_status})")]
    RetriesExhausted { attempts: u32, last_status: String },

    #[error("http status {status} from {url}")]
    Http { status: u16, url: String },

    #[error("network access disabled and no cached data for {0}")]
    NetworkDisabled(String),

    #[error("unknown figure id `{id}`; available: {}", available.join(", "))]
    UnknownFigure { id: String, available: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
