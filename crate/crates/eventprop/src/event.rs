//! Packet payloads exchanged between layer cores.

use evfabric_core::MAX_PAYLOAD_BYTES;

/// An error value travelling backward to the neuron that spiked.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorEvent {
    pub tick: u32,
    /// Routing key of the spike this error belongs to.
    pub key: u32,
    /// `dL/dτ` of that spike.
    pub value: f32,
}

pub const ERROR_EVENT_BYTES: usize = 12;
const _: () = assert!(ERROR_EVENT_BYTES <= MAX_PAYLOAD_BYTES);

impl ErrorEvent {
    pub fn to_bytes(&self) -> [u8; ERROR_EVENT_BYTES] {
        let mut b = [0; ERROR_EVENT_BYTES];
        b[..4].copy_from_slice(&self.tick.to_le_bytes());
        b[4..8].copy_from_slice(&self.key.to_le_bytes());
        b[8..].copy_from_slice(&self.value.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        let word = |i: usize| Some(u32::from_le_bytes(b.get(4 * i..4 * i + 4)?.try_into().ok()?));
        (b.len() == ERROR_EVENT_BYTES).then_some(())?;
        Some(Self {
            tick: word(0)?,
            key: word(1)?,
            value: f32::from_bits(word(2)?),
        })
    }
}

/// Forward spike payload: tick and sub-tick offset.
pub const SPIKE_BYTES: usize = 8;

pub fn spike_payload(tick: u32, offset: f32) -> [u8; SPIKE_BYTES] {
    let mut b = [0; SPIKE_BYTES];
    b[..4].copy_from_slice(&tick.to_le_bytes());
    b[4..].copy_from_slice(&offset.to_le_bytes());
    b
}
