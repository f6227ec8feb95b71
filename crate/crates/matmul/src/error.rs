use evfabric_core::{EnergyError, FabricError};
use thiserror::Error;

use crate::fsm::WorkerState;

#[derive(Debug, Error)]
pub enum MatmulError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("task {task}: illegal transition {from:?} -> {to:?}")]
    IllegalTransition {
        task: usize,
        from: WorkerState,
        to: WorkerState,
    },
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MatmulError> = std::result::Result<T, E>;
