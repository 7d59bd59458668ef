use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by failure class so callers (notably the CLI) can map
/// them to distinct exit codes: configuration, data ingestion, numeric
/// failures, and checkpoint integrity.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was called in the wrong order, e.g. backward without a
    /// cached forward pass.
    #[error("state error: {0}")]
    State(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {msg}")]
    DataFormat { path: String, msg: String },

    #[error("{path}:{row}: {msg}")]
    DataRow {
        path: String,
        /// 1-based data-file line number.
        row: usize,
        msg: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Non-finite training loss; carries the epoch where it appeared.
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("solver did not converge within {max_iter} iterations (last max coefficient change {last_change:.3e})")]
    NonConvergence { max_iter: usize, last_change: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("checkpoint checksum mismatch: stored {stored}, computed {computed}")]
    ChecksumMismatch { stored: String, computed: String },

    #[error("checkpoint format version {found} is not supported (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("checkpoint tensor mismatch: {0}")]
    TensorMismatch(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
