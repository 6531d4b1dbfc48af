use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("catalog parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{field}`: {message}")]
    Invariant { field: String, message: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("window [{t1}, {t2}] s lies outside the sampled grid [{lo}, {hi}] s")]
    OutOfGrid { t1: f64, t2: f64, lo: f64, hi: f64 },
    #[error("snr never falls below the threshold {threshold} on the supplied grid")]
    Unbounded { threshold: f64 },
    #[error("`{what}` is not available for `{name}`")]
    AbsentData { name: String, what: String },
    #[error("signal {signal} does not exceed the background level {background} by the required margin {margin}")]
    SignalBelowBackground {
        signal: f64,
        background: f64,
        margin: f64,
    },
    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("all bins are empty")]
    AllZeroCounts,
    #[error("empty range: {0}")]
    EmptyRange(String),
    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),
    #[error("only {found} counts in the analysis window, need at least {needed}")]
    InsufficientEvents { found: usize, needed: usize },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            message: message.into(),
        }
    }
}
