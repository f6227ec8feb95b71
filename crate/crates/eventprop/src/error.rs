use evfabric_core::{EnergyError, FabricError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventpropError {
    #[error("invalid network: {0}")]
    InvalidNet(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

pub type Result<T, E = EventpropError> = std::result::Result<T, E>;
