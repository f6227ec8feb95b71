//! Key/mask multicast routing tables.

use std::collections::BTreeSet;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::error::{FabricError, Result};
use crate::topology::{ChipCoord, Port};

bitflags! {
    /// Set of outgoing inter-chip links.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
    pub struct LinkSet: u8 {
        const E = 1 << 0;
        const NE = 1 << 1;
        const N = 1 << 2;
        const W = 1 << 3;
        const SW = 1 << 4;
        const S = 1 << 5;
    }
}

impl LinkSet {
    pub fn of(port: Port) -> Self {
        LinkSet::from_bits_truncate(1 << port.index())
    }

    pub fn has(&self, port: Port) -> bool {
        self.contains(Self::of(port))
    }

    /// Member ports in preference order.
    pub fn ports(&self) -> impl Iterator<Item = Port> + '_ {
        Port::ALL.into_iter().filter(|p| self.has(*p))
    }
}

impl FromIterator<Port> for LinkSet {
    fn from_iter<I: IntoIterator<Item = Port>>(iter: I) -> Self {
        iter.into_iter().fold(LinkSet::empty(), |s, p| s | LinkSet::of(p))
    }
}

impl Serialize for LinkSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.ports())
    }
}

impl<'de> Deserialize<'de> for LinkSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Vec::<Port>::deserialize(d)?.into_iter().collect())
    }
}

/// Where a packet entered the router.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arrival {
    Local,
    Link(Port),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingEntry {
    pub key: u32,
    pub mask: u32,
    pub links: LinkSet,
    pub local_pes: BTreeSet<u16>,
}

impl RoutingEntry {
    pub fn new(
        key: u32,
        mask: u32,
        links: LinkSet,
        local_pes: impl IntoIterator<Item = u16>,
    ) -> Result<Self> {
        let entry = Self {
            key,
            mask,
            links,
            local_pes: local_pes.into_iter().collect(),
        };
        entry.validate()?;
        Ok(entry)
    }

    pub fn validate(&self) -> Result<()> {
        if self.key & !self.mask != 0 {
            return Err(FabricError::InvalidEntry(format!(
                "key {:#010x} has bits outside mask {:#010x}",
                self.key, self.mask
            )));
        }
        if self.links.is_empty() && self.local_pes.is_empty() {
            return Err(FabricError::InvalidEntry(format!(
                "entry {:#010x}/{:#010x} has no outputs",
                self.key, self.mask
            )));
        }
        Ok(())
    }

    pub fn matches(&self, key: u32) -> bool {
        key & self.mask == self.key
    }
}

/// Ordered entries; earlier entries take priority.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingTable {
    pub entries: Vec<RoutingEntry>,
}

impl RoutingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: RoutingEntry) -> Result<()> {
        entry.validate()?;
        self.entries.push(entry);
        Ok(())
    }

    pub fn lookup(&self, key: u32) -> Option<&RoutingEntry> {
        self.entries.iter().find(|e| e.matches(key))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RouteDecision {
    pub links: LinkSet,
    pub local_pes: BTreeSet<u16>,
}

/// Routes one packet through one chip's router.
///
/// Unmatched packets arriving on a link continue straight through to the
/// opposite link; unmatched local injections are a mapping error.
pub fn route_packet(
    table: &RoutingTable,
    chip: ChipCoord,
    key: u32,
    arrival: Arrival,
) -> Result<RouteDecision> {
    if let Some(e) = table.lookup(key) {
        return Ok(RouteDecision {
            links: e.links,
            local_pes: e.local_pes.clone(),
        });
    }
    match arrival {
        Arrival::Link(p) => Ok(RouteDecision {
            links: LinkSet::of(p.opposite()),
            local_pes: BTreeSet::new(),
        }),
        Arrival::Local => Err(FabricError::NoRoute { chip, key }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const C0: ChipCoord = ChipCoord::new(0, 0);

    #[test]
    fn masked_match() {
        let mut t = RoutingTable::new();
        t.push(RoutingEntry::new(0x1200, 0xFF00, LinkSet::E, [3]).unwrap())
            .unwrap();
        let d = route_packet(&t, C0, 0x1234, Arrival::Local).unwrap();
        assert_eq!(d.links, LinkSet::E);
        assert_eq!(d.local_pes, BTreeSet::from([3]));
    }

    #[test]
    fn default_routes_straight_through() {
        let t = RoutingTable::new();
        let d = route_packet(&t, C0, 0x99, Arrival::Link(Port::W)).unwrap();
        assert_eq!(d.links, LinkSet::E);
        assert!(d.local_pes.is_empty());
    }

    #[test]
    fn unmatched_local_injection_fails() {
        let t = RoutingTable::new();
        assert_eq!(
            route_packet(&t, C0, 0x99, Arrival::Local).unwrap_err(),
            FabricError::NoRoute { chip: C0, key: 0x99 }
        );
    }

    #[test]
    fn first_match_wins() {
        let mut t = RoutingTable::new();
        t.push(RoutingEntry::new(0x10, 0xF0, LinkSet::N, []).unwrap())
            .unwrap();
        t.push(RoutingEntry::new(0x00, 0x00, LinkSet::S, []).unwrap())
            .unwrap();
        assert_eq!(route_packet(&t, C0, 0x13, Arrival::Local).unwrap().links, LinkSet::N);
        assert_eq!(route_packet(&t, C0, 0x23, Arrival::Local).unwrap().links, LinkSet::S);
    }

    #[test]
    fn entry_invariants() {
        assert!(RoutingEntry::new(0x1201, 0xFF00, LinkSet::E, []).is_err());
        assert!(RoutingEntry::new(0x1200, 0xFF00, LinkSet::empty(), []).is_err());
    }

    #[test]
    fn linkset_serde() {
        let s = LinkSet::E | LinkSet::SW;
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"["E","SW"]"#);
        assert_eq!(serde_json::from_str::<LinkSet>(&j).unwrap(), s);
    }

    proptest! {
        #[test]
        fn empty_table_default_is_opposite(key in any::<u32>(), p in 0usize..6) {
            let port = Port::ALL[p];
            let d = route_packet(&RoutingTable::new(), C0, key, Arrival::Link(port)).unwrap();
            prop_assert_eq!(d.links, LinkSet::of(port.opposite()));
            prop_assert!(d.local_pes.is_empty());
        }
    }
}
