use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// Variants map onto the CLI exit-code classes: configuration problems,
/// resource exhaustion, and violated mathematical preconditions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid truncation radius {r}: must be at least r_q = {r_q}")]
    InvalidTruncation { r: f64, r_q: f64 },

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "resource limit exceeded: {what} needs {required_bytes} bytes (budget {budget_bytes})"
    )]
    Resource {
        what: String,
        required_bytes: u64,
        budget_bytes: u64,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("hypothesis violated at n = {n}: {message}")]
    Hypothesis { n: usize, message: String },

    #[error("bracket check failed: p(lo) = {p_lo:.4}, p(hi) = {p_hi:.4}, target {target}")]
    Bracket { p_lo: f64, p_hi: f64, target: f64 },

    #[error("detector `{0}` is not monotone")]
    NotMonotone(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
