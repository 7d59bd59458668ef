//! Process exit-code policy: every failure is classified as a config/usage
//! problem (2), a data or I/O problem (3), a numeric problem (4), or a
//! checkpoint problem (5).

use densereg::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_CHECKPOINT: i32 = 5;

/// A failure carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    /// Classifies a library error arising from checkpoint handling: parse
    /// and validation failures are checkpoint errors, unreadable files stay
    /// I/O errors.
    pub fn checkpoint(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => EXIT_DATA,
            _ => EXIT_CHECKPOINT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidSpec(_) | Error::InvalidConfig(_) => EXIT_CONFIG,
            Error::Io { .. } | Error::DataFormat { .. } | Error::DataRow { .. } => EXIT_DATA,
            Error::ChecksumMismatch { .. }
            | Error::UnsupportedVersion { .. }
            | Error::TensorMismatch(_) => EXIT_CHECKPOINT,
            Error::Json { .. } => EXIT_DATA,
            Error::ShapeMismatch { .. }
            | Error::Domain(_)
            | Error::State(_)
            | Error::NonFiniteLoss { .. }
            | Error::NonConvergence { .. }
            | Error::UndefinedMetric(_)
            | Error::Numeric(_) => EXIT_NUMERIC,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, CliError>;
