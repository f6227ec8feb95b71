use evfabric_core::{EnergyError, FabricError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnnError {
    #[error("invalid network: {0}")]
    Network(String),
    #[error("population `{population}` neuron {neuron} needs {bytes} bytes, over the {budget}-byte budget")]
    Unpartitionable {
        population: String,
        neuron: u32,
        bytes: u64,
        budget: u64,
    },
    #[error("{vertices} vertices do not fit on {pes} PEs")]
    MachineTooSmall { vertices: usize, pes: usize },
    #[error("32-bit key space exhausted at vertex {0}")]
    KeySpaceExhausted(usize),
    #[error("spike from tick {emitted} arrived after tick {now} started")]
    LateSpike { emitted: u32, now: u64 },
    #[error("stimulus: {0}")]
    Stimulus(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SnnError> = std::result::Result<T, E>;
