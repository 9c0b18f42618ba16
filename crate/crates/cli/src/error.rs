use thiserror::Error;

use wgqed_core::correlator::CorrelatorError;
use wgqed_core::inference::FitError;
use wgqed_core::physics::PhysicsError;
use wgqed_core::trajectory::SimError;

/// Failure of a subcommand; each kind has a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments or input files.
    #[error("{0}")]
    Input(String),
    /// The simulation failed after its configuration was accepted.
    #[error("{0}")]
    Runtime(String),
    /// The fit ran but did not converge; its result was still written.
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => CliError::Input(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<CorrelatorError> for CliError {
    fn from(e: CorrelatorError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PhysicsError> for CliError {
    fn from(e: PhysicsError) -> Self {
        CliError::Input(e.to_string())
    }
}
