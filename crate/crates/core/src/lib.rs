//! Deterministic discrete-event model of an event-driven many-core fabric:
//! chips on a six-link torus, each with cores (PEs), DRAM, DMA and a key/mask
//! multicast router, plus an event-level energy model with DVFS and sleep.

pub mod activity;
pub mod config;
pub mod energy;
pub mod error;
pub mod event;
pub mod kernel;
pub mod memory;
pub mod packet;
pub mod router;
pub mod topology;
pub mod trace;

pub use activity::{Activity, PeActivity};
pub use config::{DvfsLevel, MachineConfig};
pub use energy::{account, batch_sweep, BatchWorkload, CostModel, EnergyError, EnergyReport, SweepPoint, SweepRun};
pub use error::{FabricError, Result};
pub use event::{Cycles, EventClass, Irq};
pub use kernel::{Machine, PeContext, PeMode, PeProgram, PeState};
pub use memory::{DmaRequest, MemRef};
pub use packet::{Packet, PacketKind, MAX_PAYLOAD_BYTES};
pub use router::{route_packet, Arrival, LinkSet, RouteDecision, RoutingEntry, RoutingTable};
pub use topology::{hop_distance, ChipCoord, PeId, Port, ShortestPathTree, TorusDims};
pub use trace::{CommLog, TraceRecord};
