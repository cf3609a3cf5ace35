use mvtrack_core::error::{CalibError, DataError};
use mvtrack_core::Error;
use thiserror::Error;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_COLD_START: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::Core(e.into())
    }
}

fn core_code(e: &Error) -> i32 {
    match e {
        Error::Data(DataError::Schema { .. } | DataError::Config(_)) => EXIT_SCHEMA,
        Error::Data(DataError::Io { .. }) => EXIT_IO,
        Error::Calib(CalibError::ColdStartFailure { .. }) => EXIT_COLD_START,
        Error::View { source, .. } => core_code(source),
        _ => EXIT_FAILURE,
    }
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(e) => core_code(e),
            Self::Usage(_) => EXIT_USAGE,
        }
    }
}
