use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::error::{FabricError, Result};
use crate::event::Cycles;
use crate::topology::PeId;

/// 128 bits.
pub const MAX_PAYLOAD_BYTES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PacketKind {
    /// Routed by key through the per-chip routing tables.
    Multicast,
    /// Routed along a shortest path to a single destination PE.
    PointToPoint { dest: PeId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub key: u32,
    payload: ArrayVec<u8, MAX_PAYLOAD_BYTES>,
    pub kind: PacketKind,
    pub origin: PeId,
    pub inject_time: Cycles,
}

impl Packet {
    pub fn multicast(key: u32, origin: PeId, payload: &[u8]) -> Result<Self> {
        Self::build(key, PacketKind::Multicast, origin, payload)
    }

    pub fn point_to_point(dest: PeId, key: u32, origin: PeId, payload: &[u8]) -> Result<Self> {
        Self::build(key, PacketKind::PointToPoint { dest }, origin, payload)
    }

    fn build(key: u32, kind: PacketKind, origin: PeId, payload: &[u8]) -> Result<Self> {
        let payload =
            ArrayVec::try_from(payload).map_err(|_| FabricError::PayloadTooLarge(payload.len()))?;
        Ok(Self {
            key,
            payload,
            kind,
            origin,
            inject_time: 0,
        })
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Reads little-endian `u32` word `i` of the payload.
    pub fn word(&self, i: usize) -> Option<u32> {
        let b = self.payload.get(4 * i..4 * i + 4)?;
        Some(u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f32_word(&self, i: usize) -> Option<f32> {
        self.word(i).map(f32::from_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_limit() {
        let pe = PeId::new(0, 0, 0);
        assert!(Packet::multicast(1, pe, &[0; 16]).is_ok());
        assert_eq!(
            Packet::multicast(1, pe, &[0; 17]).unwrap_err(),
            FabricError::PayloadTooLarge(17)
        );
    }

    #[test]
    fn words_roundtrip() {
        let pe = PeId::new(0, 0, 0);
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&7u32.to_le_bytes());
        bytes.extend_from_slice(&1.5f32.to_bits().to_le_bytes());
        let p = Packet::multicast(9, pe, &bytes).unwrap();
        assert_eq!(p.word(0), Some(7));
        assert_eq!(p.f32_word(1), Some(1.5));
        assert_eq!(p.word(2), None);
    }
}
