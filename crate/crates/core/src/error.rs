use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("angle {value} rad outside [{lo}, {hi}]")]
    AngleDomain { value: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("narrowband channel requires zero delays (path {path} has delay {delay} s)")]
    NonzeroDelay { path: usize, delay: f64 },

    #[error("count {lambda} exceeds number of measurements {n}")]
    CountOutOfRange { lambda: u32, n: u32 },

    #[error("wrong likelihood mode: {0}")]
    Mode(String),

    #[error("bracket inverted: lo = {lo}, hi = {hi}")]
    BracketInverted { lo: f64, hi: f64 },

    #[error("cannot select {requested} peaks from a grid of {available} samples")]
    TooManyPeaks { requested: usize, available: usize },

    #[error("empty snapshot")]
    EmptySnapshot,

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed channel profile: {0}")]
    Profile(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("angular separation could not be met after {0} attempts")]
    SeparationInfeasible(usize),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
