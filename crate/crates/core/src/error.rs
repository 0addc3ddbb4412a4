//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema violation in {context}: {message}")]
    Schema { context: String, message: String },

    #[error("unknown flag id `{0}`")]
    UnknownFlag(String),

    #[error("unknown level `{level}` for standard `{standard}`")]
    UnknownLevel { standard: String, level: String },

    #[error("unknown standard `{0}`")]
    UnknownStandard(String),

    #[error("no standard matched the prompt")]
    NoStandardFound,

    #[error("no level of standard `{standard}` matched the prompt")]
    NoLevelFound { standard: String },

    #[error("ambiguous {what}: candidates {candidates:?}")]
    Ambiguous {
        what: String,
        candidates: Vec<String>,
    },

    #[error("prompt carries no task payload (expected a CONTEXT:/THEME: marker or a quoted theme word)")]
    MissingPayload,

    #[error("text is empty after trimming")]
    EmptyText,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("level `{level}` has {count} item(s); at least 2 are required")]
    InsufficientItems { level: String, count: usize },

    #[error("no exemplars recorded for level `{0}`")]
    NoExemplars(String),

    #[error("feature vector is missing flag `{0}`")]
    MissingFlag(String),

    #[error("flag `{0}` has zero standard deviation; z-score normalization undefined")]
    ZeroStd(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("backend error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Backend {
        status: Option<u16>,
        message: String,
    },

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("length enforcement exhausted: needed at least {min} words, last response had {got}")]
    LengthEnforcementExhausted { min: usize, got: usize },

    #[error("external classifier failed: {0}")]
    External(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
