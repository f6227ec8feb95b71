use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::event::{Cycles, EventClass};
use crate::memory::DmaRequest;
use crate::packet::PacketKind;
use crate::topology::PeId;

/// Class name used for packet injections in traces and activity counts.
pub const PACKET_TX: &str = "packet_tx";

/// One row of the event trace CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: Cycles,
    pub class: String,
    pub chip_x: u16,
    pub chip_y: u16,
    pub core: u16,
    pub key: Option<u32>,
    pub detail: String,
}

impl TraceRecord {
    pub fn new(time: Cycles, class: &str, pe: PeId, key: Option<u32>, detail: String) -> Self {
        Self {
            time,
            class: class.to_string(),
            chip_x: pe.chip.x,
            chip_y: pe.chip.y,
            core: pe.core,
            key,
            detail,
        }
    }

    pub fn is(&self, class: EventClass) -> bool {
        self.class == class.name()
    }
}

pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_csv_bytes(records: &[TraceRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace_csv(records, &mut buf).expect("writing to memory");
    buf
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmaRecord {
    pub time: Cycles,
    pub issuer: PeId,
    pub request: DmaRequest,
    pub tag: u64,
    pub completes_at: Cycles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrqRecord {
    pub time: Cycles,
    pub source: Option<PeId>,
    pub target: PeId,
    pub code: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub time: Cycles,
    pub origin: PeId,
    pub key: u32,
    pub kind: PacketKind,
    pub copies: usize,
}

/// Always-on log of inter-PE communication, used for protocol audits.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommLog {
    pub dmas: Vec<DmaRecord>,
    pub irqs: Vec<IrqRecord>,
    pub injections: Vec<InjectionRecord>,
}
