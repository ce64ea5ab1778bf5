use statichedge::HedgeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files.
    #[error("{0}")]
    Input(String),

    /// A solver gave up without a usable result.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<HedgeError> for CliError {
    fn from(e: HedgeError) -> Self {
        match e {
            HedgeError::NoConvergence(_) | HedgeError::AllocationUnbounded { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
