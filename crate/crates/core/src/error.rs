use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stream(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid geography: {0}")]
    Geography(String),
    #[error("unknown zone id `{0}`")]
    UnknownZone(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("no benchmark available for `{0}`")]
    BenchmarkUnavailable(String),
    #[error("SDI inputs unavailable for `{geo_id}` on {date}")]
    InputUnavailable { geo_id: String, date: chrono::NaiveDate },
    #[error("weekly delta unavailable for `{geo_id}` ending {end}")]
    DeltaUnavailable { geo_id: String, end: chrono::NaiveDate },
    #[error("input alignment: {0}")]
    Alignment(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Configuration and usage problems map to exit code 2, everything else to 1.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Argument(_) | Error::Alignment(_) | Error::Geography(_)
        )
    }
}
