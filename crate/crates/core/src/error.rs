use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action is not one-hot: {0:?}")]
    NotOneHot(Vec<f64>),

    #[error("channel {channel} outside 1..={channels}")]
    ChannelOutOfRange { channel: usize, channels: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate sensitivity: |k| = {k:e}")]
    DegenerateSensitivity { k: f64 },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("undefined success rate: occurrence {0} has no confrontations")]
    UndefinedOccurrence(usize),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },

    #[error("checkpoint format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checkpoint incompatible with config: {0}")]
    Incompatible(String),

    #[error("trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
