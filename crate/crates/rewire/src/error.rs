use evfabric_core::{EnergyError, FabricError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RewireError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layer {layer}: {needed} connections to regrow but only {dormant} dormant pairs")]
    PoolExhausted {
        layer: usize,
        needed: usize,
        dormant: usize,
    },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("{scope}: footprint {bytes} bytes exceeds the {cap}-byte cap")]
    BudgetExceeded { scope: String, bytes: u64, cap: u64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = RewireError> = std::result::Result<T, E>;
