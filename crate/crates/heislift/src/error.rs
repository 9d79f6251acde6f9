//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the extension pipeline. Variants carry the module
/// that raised them so CLI messages and exit codes can name the source.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        module: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{module}: invalid argument: {reason}")]
    InvalidArgument { module: &'static str, reason: String },

    /// The connectivity oracle cannot fill a sphere of this dimension.
    #[error("metric_oracle: unsupported fill for target {kind} at sphere dimension k={k}")]
    UnsupportedFill { kind: String, k: usize },

    /// Two simplices intersect in something that is not a shared face.
    #[error("triangulate: non-conforming complex: {detail}")]
    Construction { detail: String },

    /// A query point lies outside every accepted cube.
    #[error("triangulate: point not covered by any accepted cube")]
    NotCovered,

    /// A projection stage came within eps_sing of its center.
    #[error("extend: radial projection too close to a singular center (stage dim {stage})")]
    SingularProximity { stage: usize },

    /// All finite-difference probes left the domain.
    #[error("analyze: no valid finite-difference direction at the sample point")]
    NoValidDirection,

    #[error("{module}: parse error: {reason}")]
    Parse { module: &'static str, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(module: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            module,
            reason: reason.into(),
        }
    }

    pub fn parse(module: &'static str, reason: impl Into<String>) -> Self {
        Error::Parse {
            module,
            reason: reason.into(),
        }
    }
}
