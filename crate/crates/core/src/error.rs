//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Shape or emptiness violations on numeric inputs.
    #[error("input shape error: {0}")]
    InputShape(String),

    /// A parameter outside its documented domain (gamma <= 0, C <= 0, ...).
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// NaN or infinity where a finite value is required.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// The dual solver hit its iteration cap before reaching the KKT tolerance.
    #[error(
        "solver did not converge: {iterations} iterations, max KKT violation {violation:.3e} \
         (tolerance {tolerance:.3e}), dual objective {objective:.6e}"
    )]
    Convergence {
        iterations: u64,
        violation: f64,
        tolerance: f64,
        objective: f64,
    },

    /// A preprocessing step could not be fitted or applied.
    #[error("pipeline error: {0}")]
    Pipeline(String),

    /// Metric preconditions violated (constant targets, length mismatch).
    #[error("metric error: {0}")]
    Metric(String),

    /// CSV header does not match the declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A malformed cell in an input file; `line` is 1-based and counts the header.
    #[error("parse error at line {line}, column '{column}': {message}")]
    ParseCsv {
        line: u64,
        column: String,
        message: String,
    },

    /// Pollutant absent from the breakpoint table.
    #[error("unknown pollutant: {0}")]
    UnknownPollutant(String),

    /// Model artifact written by an unsupported format version.
    #[error("unsupported artifact format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    /// Model artifact file is corrupt or truncated; `field` is the JSON path.
    #[error("artifact parse error at field '{field}': {message}")]
    Artifact { field: String, message: String },

    /// Every random-search trial failed.
    #[error("hyperparameter search failed: {0}")]
    Search(String),

    /// Run configuration rejected before any computation.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable kind tag, used by the CLI error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InputShape(_) => "input_shape",
            Error::InvalidParam(_) => "invalid_param",
            Error::NonFinite(_) => "non_finite",
            Error::Convergence { .. } => "convergence",
            Error::Pipeline(_) => "pipeline",
            Error::Metric(_) => "metric",
            Error::Schema(_) => "schema",
            Error::ParseCsv { .. } => "parse_csv",
            Error::UnknownPollutant(_) => "unknown_pollutant",
            Error::UnsupportedVersion { .. } => "unsupported_version",
            Error::Artifact { .. } => "artifact",
            Error::Search(_) => "search",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
