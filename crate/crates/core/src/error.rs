use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: String, column: String },

    #[error("duplicate observation for firm {firm} at {period} in {path}")]
    DuplicateObservation {
        path: String,
        firm: String,
        period: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate breakpoints: {0}")]
    DegenerateBreakpoints(String),

    #[error("rank deficient design: collinear columns {0:?}")]
    RankDeficient(Vec<String>),

    #[error("insufficient observations: {n_obs} rows for {n_regressors} regressors")]
    InsufficientObservations { n_obs: usize, n_regressors: usize },

    #[error("missing factor series: {0:?}")]
    MissingFactors(Vec<String>),

    #[error("no valid periods: {0}")]
    NoValidPeriods(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("synthetic generation failed: {0}")]
    Generation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<String>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
            Error::MissingColumn { .. } => "schema_mismatch",
            Error::DuplicateObservation { .. } => "duplicate_observation",
            Error::Invalid(_) => "invalid_input",
            Error::DegenerateBreakpoints(_) => "degenerate_breakpoints",
            Error::RankDeficient(_) => "rank_deficient",
            Error::InsufficientObservations { .. } => "insufficient_observations",
            Error::MissingFactors(_) => "missing_factors",
            Error::NoValidPeriods(_) => "no_valid_periods",
            Error::Config(_) => "config",
            Error::Generation(_) => "generation",
        }
    }
}
