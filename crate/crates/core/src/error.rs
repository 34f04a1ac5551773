use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the pipeline can report. Each variant maps to one stable
/// category string (see [`Error::category`]) which the CLI turns into an
/// exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error at row {row}: {msg}")]
    Data { row: usize, msg: String },

    #[error("data error: {0}")]
    Empty(String),

    #[error("config error for key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("normalization error: channel {channel} has no positive amplitude")]
    Normalization { channel: String },

    #[error("kinematics error at sample {sample}: {msg}")]
    Kinematics { sample: usize, msg: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("training error at epoch {epoch}: {msg}")]
    Training { epoch: usize, msg: String },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("bundle error: {0}")]
    Bundle(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// Machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingInput(_) => "missing-input",
            Error::Schema(_) => "schema",
            Error::Data { .. } | Error::Empty(_) => "data",
            Error::Config { .. } => "config",
            Error::Shape(_) => "shape",
            Error::Length(_) => "length",
            Error::Parameter(_) => "parameter",
            Error::Normalization { .. } => "normalization",
            Error::Kinematics { .. } => "kinematics",
            Error::Split(_) => "split",
            Error::Encoding(_) => "encoding",
            Error::Training { .. } => "training",
            Error::Metric(_) => "metric",
            Error::Protocol(_) => "protocol",
            Error::Bundle(_) => "bundle",
        }
    }
}
