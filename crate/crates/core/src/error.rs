use std::path::PathBuf;

use thiserror::Error;

use crate::market_data::Date;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: malformed header, expected `{expected}`, found `{found}`")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{0}: file contains no observations")]
    EmptyFile(PathBuf),

    #[error("series `{series}`: duplicate or out-of-order date {date}")]
    DuplicateDate { series: String, date: Date },

    #[error("series `{series}`: non-finite value at {date}")]
    NonFinite { series: String, date: Date },

    #[error("series `{series}`: no observation on or before {date}")]
    NoObservationBefore { series: String, date: Date },

    #[error("invalid date `{0}`")]
    BadDate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate strike cross-section: {0}")]
    DegenerateStrikes(String),

    #[error("arbitrage-violating chain: fitted discount factor {b_hat} outside (0, 1.5)")]
    ArbitrageViolation { b_hat: f64 },

    #[error("OIS bootstrap failed: {0}")]
    Bootstrap(String),

    #[error("tau {tau} outside curve support (0, {last}]")]
    OutsideCurve { tau: f64, last: f64 },

    #[error("insufficient history: need {needed} observations before {date}, have {have}")]
    InsufficientHistory { needed: usize, have: usize, date: Date },

    #[error("rank-deficient design (condition number {condition:.3e}); collinear columns: {columns:?}")]
    RankDeficient { condition: f64, columns: Vec<String> },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::DegenerateStrikes(_)
            | Error::ArbitrageViolation { .. }
            | Error::Bootstrap(_)
            | Error::RankDeficient { .. }
            | Error::Numerical(_) => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
