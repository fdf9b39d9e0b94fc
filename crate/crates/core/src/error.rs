//! Error taxonomy shared across the workspace.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Study metadata violates a structural invariant (e.g. a duplicate
    /// frontal/lateral pair across the input).
    #[error("malformed metadata: {0}")]
    MalformedMetadata(String),

    /// A manifest or CSV row failed schema validation. `row` is 1-based
    /// and counts the offending line in the input file.
    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },

    /// An invalid configuration value, reported with its field path.
    #[error("config error: {0}")]
    Config(String),

    /// An image could not be read or decoded.
    #[error("ingestion error for {path:?}: {message}")]
    Ingestion { path: PathBuf, message: String },

    /// Non-finite values or other numeric breakdown, with enough context
    /// to locate the source (layer, row, or step).
    #[error("numeric error at {location}: {message}")]
    Numeric { location: String, message: String },

    /// Training produced a non-finite loss.
    #[error("divergence at step {step}: loss is not finite")]
    Divergence { step: usize },

    /// A loss was requested on inputs where it is undefined.
    #[error("undefined loss: {0}")]
    UndefinedLoss(String),

    /// A caller broke an API contract (mismatched ids, missing init, N < 2).
    #[error("contract error: {0}")]
    Contract(String),

    /// Participants of a simulated gather presented inconsistent batches.
    #[error("distributed contract error: {0}")]
    DistributedContract(String),

    /// An internal consistency check failed; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn numeric(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn schema(row: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            row,
            message: message.into(),
        }
    }
}
