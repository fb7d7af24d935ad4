use std::fmt;

use lclt_core::groups::GroupError;
use lclt_core::montecarlo::McError;
use lclt_core::predict::PredictError;
use lclt_core::renewal_exact::RenewalError;
use lclt_core::spectral::SpectralError;
use lclt_core::SystemError;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input (exit 2).
    Parse(String),
    /// Mathematically invalid request (exit 3).
    Math(String),
    /// A verification table contained a FAIL row (exit 4).
    Verify(String),
    /// Filesystem trouble while writing artifacts (exit 1).
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Math(_) => 3,
            CliError::Verify(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Math(m) => write!(f, "math error: {m}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Parse(m) => CliError::Parse(m),
            other => CliError::Math(other.to_string()),
        }
    }
}

impl From<GroupError> for CliError {
    fn from(e: GroupError) -> Self {
        match e {
            GroupError::Parse(m) => CliError::Parse(m),
            other => CliError::Math(other.to_string()),
        }
    }
}

macro_rules! math_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Math(e.to_string())
            }
        }
    )*};
}

math_error!(PredictError, McError, RenewalError, SpectralError);
