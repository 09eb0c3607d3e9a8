use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised across the library.
///
/// Each variant has a stable kebab-case [`Error::kind`] used in the CLI's
/// machine-readable error line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient history: first missing day is {first_missing}")]
    InsufficientHistory { first_missing: NaiveDate },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("empty evaluation: no evaluated days")]
    EmptyEvaluation,

    #[error("degenerate benchmark: benchmark MAE is zero for series {series} at slot {slot}")]
    DegenerateBenchmark { series: String, slot: usize },

    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("missing data: {count} cell(s) missing, first: {}", first.iter().map(|(z, d, s)| format!("({z}, {d}, {s})")).collect::<Vec<_>>().join(", "))]
    MissingData {
        count: usize,
        /// Up to the first ten missing `(zone, day, slot)` cells.
        first: Vec<(String, NaiveDate, usize)>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InsufficientHistory { .. } => "insufficient-history",
            Error::InsufficientSamples { .. } => "insufficient-samples",
            Error::DegenerateVariance(_) => "degenerate-variance",
            Error::SingularCovariance(_) => "singular-covariance",
            Error::InvalidCovariance(_) => "invalid-covariance",
            Error::EmptyEvaluation => "empty-evaluation",
            Error::DegenerateBenchmark { .. } => "degenerate-benchmark",
            Error::IncompleteInput(_) => "incomplete-input",
            Error::Schema(_) => "schema",
            Error::MissingData { .. } => "missing-data",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
