use thiserror::Error;

#[derive(Debug, Error)]
pub enum AmcError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {layer}: {detail}")]
    Numeric { layer: String, detail: String },
    #[error("domain mismatch: {0}")]
    Domain(String),
    #[error("threat model violation: {0}")]
    ThreatModel(String),
    #[error("cannot split dataset: {0}")]
    Split(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported {what} version {found} (this build reads version {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AmcError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            AmcError::Config(_) => 1,
            AmcError::Numeric { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, AmcError>;
