use thiserror::Error;

use crate::event::Cycles;
use crate::topology::{ChipCoord, PeId};

pub type Result<T, E = FabricError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FabricError {
    #[error("no routing entry for locally injected key {key:#010x} on chip {chip}")]
    NoRoute { chip: ChipCoord, key: u32 },

    #[error("packet with key {key:#010x} exceeded {hops} hops (routing loop)")]
    RoutingLoop { key: u32, hops: u32 },

    #[error("event scheduled at {at} but simulation time is already {now}")]
    EventInPast { at: Cycles, now: Cycles },

    #[error("memory access [{addr:#x}, +{len}) outside region of {size} bytes")]
    OutOfBounds { addr: u64, len: u64, size: u64 },

    #[error("program for {pe} needs {requested} bytes of SRAM, capacity is {capacity}")]
    SramExceeded { pe: PeId, requested: u64, capacity: u64 },

    #[error("payload of {0} bytes exceeds the 16-byte packet limit")]
    PayloadTooLarge(usize),

    #[error("invalid routing entry: {0}")]
    InvalidEntry(String),

    #[error("chip {0} is outside the machine")]
    BadChip(ChipCoord),

    #[error("{0} is outside the machine")]
    BadPe(PeId),

    #[error("no program loaded on {0}")]
    NotLoaded(PeId),

    #[error("DVFS level {level} not in table of {levels} levels")]
    BadLevel { level: usize, levels: usize },

    #[error("invalid machine configuration: {0}")]
    Config(String),

    #[error("program error on {pe}: {msg}")]
    Program { pe: PeId, msg: String },
}

impl FabricError {
    pub fn program(pe: PeId, msg: impl Into<String>) -> Self {
        FabricError::Program { pe, msg: msg.into() }
    }
}
