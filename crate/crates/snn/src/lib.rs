//! Spiking networks on the fabric: a population/projection description,
//! the mapping pipeline (partition, place, keys, routing tables) and the
//! LIF runtime that executes the mapped network.

pub mod error;
pub mod lif;
pub mod mapping;
pub mod network;
pub mod probe;
pub mod runtime;

pub use error::{Result, SnnError};
pub use lif::{lif_step, process_spike, LifState, SynapseRows, SynapseWord};
pub use mapping::{
    assign_keys, build_routing_tables, map_network, partition, place, place_random, KeyBlock,
    KeyMap, MachineGraph, MachineVertex, Mapping, Placement, PlacementStrategy, SramCost,
};
pub use probe::probe_deliveries;
pub use network::{Connectivity, DelaySpec, LifParams, Network, Population, Projection, WeightSpec};
pub use runtime::{
    read_spikes_csv, run_snn, write_spikes_csv, DvfsPolicy, RunOptions, SnnRun, VertexProgram,
};
