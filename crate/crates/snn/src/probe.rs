//! Routing verification: inject every source key of a mapping into a fabric
//! loaded with counting programs and record where copies land.

use std::collections::BTreeMap;

use evfabric_core::{Machine, MachineConfig, Packet, PeContext, PeId, PeProgram, Result as FabricResult};

use crate::error::Result;
use crate::mapping::Mapping;

#[derive(Default)]
struct Counter {
    received: BTreeMap<u32, usize>,
}

impl PeProgram for Counter {
    fn sram_bytes(&self) -> u32 {
        0
    }

    fn on_packet(&mut self, _ctx: &mut PeContext<'_>, pkt: &Packet) -> FabricResult<()> {
        *self.received.entry(pkt.key).or_insert(0) += 1;
        Ok(())
    }
}

/// For every vertex with outgoing edges: `(vertex, deliveries per PE)` of
/// one packet carrying the vertex's base key.
pub fn probe_deliveries(
    mapping: &Mapping,
    cfg: &MachineConfig,
) -> Result<Vec<(usize, BTreeMap<PeId, usize>)>> {
    let mut m = Machine::new(cfg.clone())?;
    for (i, t) in mapping.tables.iter().enumerate() {
        if !t.is_empty() {
            m.set_table(mapping.dims.coord(i), t.clone())?;
        }
    }
    for pe in m.config().dims().chips().collect::<Vec<_>>() {
        for core in 0..cfg.cores_per_chip {
            m.load(PeId { chip: pe, core }, Box::new(Counter::default()))?;
        }
    }
    let mut out = Vec::new();
    for (v, block) in mapping.keys.blocks.iter().enumerate() {
        if mapping.graph.targets(v).next().is_none() {
            continue;
        }
        m.inject(Packet::multicast(block.base, mapping.placement.pes[v], &[])?)?;
        m.run_until_idle()?;
        let mut got = BTreeMap::new();
        for pe in m.loaded_pes() {
            let c: &mut Counter = m.program_mut(pe).expect("counter");
            if let Some(n) = c.received.remove(&block.base) {
                got.insert(pe, n);
            }
        }
        out.push((v, got));
    }
    Ok(out)
}
