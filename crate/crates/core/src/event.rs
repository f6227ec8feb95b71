use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::memory::DmaRequest;
use crate::packet::Packet;
use crate::topology::PeId;

/// Simulated time in reference clock cycles.
pub type Cycles = u64;

/// Event classes, declared in dispatch priority order for equal timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    PacketRx,
    DmaDone,
    Timer,
    Irq,
    User,
}

impl EventClass {
    pub const ALL: [EventClass; 5] = [
        EventClass::PacketRx,
        EventClass::DmaDone,
        EventClass::Timer,
        EventClass::Irq,
        EventClass::User,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventClass::PacketRx => "packet_rx",
            EventClass::DmaDone => "dma_done",
            EventClass::Timer => "timer",
            EventClass::Irq => "irq",
            EventClass::User => "user",
        }
    }
}

/// Interrupt request raised by another PE, or by the host when `source` is
/// `None`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Irq {
    pub source: Option<PeId>,
    pub code: u32,
    pub args: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventBody {
    Packet(Packet),
    DmaDone { tag: u64, request: DmaRequest },
    Timer { tag: u64 },
    Irq(Irq),
    User { tag: u64, data: u64 },
}

impl EventBody {
    pub fn class(&self) -> EventClass {
        match self {
            EventBody::Packet(_) => EventClass::PacketRx,
            EventBody::DmaDone { .. } => EventClass::DmaDone,
            EventBody::Timer { .. } => EventClass::Timer,
            EventBody::Irq(_) => EventClass::Irq,
            EventBody::User { .. } => EventClass::User,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Event {
    pub time: Cycles,
    pub target: PeId,
    pub seq: u64,
    pub body: EventBody,
}

impl Event {
    pub fn class(&self) -> EventClass {
        self.body.class()
    }

    /// The strict total order of dispatch:
    /// `(time, class priority, chip_y, chip_x, core, seq)`.
    pub fn order_key(&self) -> (Cycles, EventClass, (u16, u16, u16), u64) {
        (self.time, self.class(), self.target.order_key(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.order_key() == other.order_key()
    }
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
