use thiserror::Error;

use levy_mkv_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("numerical blow-up: {0}")]
    BlowUp(String),
    #[error("acceptance check failed: {0}")]
    Check(String),
    #[error("{0}")]
    Core(CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Assumption(_) => 3,
            HarnessError::BlowUp(_) => 4,
            HarnessError::Check(_) => 5,
            HarnessError::Core(_) | HarnessError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for HarnessError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::BlowUp { .. } => HarnessError::BlowUp(e.to_string()),
            CoreError::FrictionCondition { .. } => HarnessError::Assumption(e.to_string()),
            CoreError::InvalidParameter { .. }
            | CoreError::UnsupportedDimension { .. }
            | CoreError::EnvelopeInfeasible { .. } => HarnessError::Config(e.to_string()),
            other => HarnessError::Core(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
