//! Byte accounting for a layer held in one core's SRAM.

use serde::{Deserialize, Serialize};

use crate::connectome::{SparseConnectome, SparseLayer};
use crate::error::{Result, RewireError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryBudget {
    pub cap: u64,
    /// u16 pre, u16 post with the sign in its top bit, f32 θ, f32 gradient.
    pub bytes_per_connection: u64,
    /// f32 input activation and f32 back-propagated error.
    pub bytes_per_input: u64,
    /// f32 bias, bias gradient, pre-activation and error.
    pub bytes_per_output: u64,
    /// Code, stack and bookkeeping.
    pub overhead: u64,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self {
            cap: 65536,
            bytes_per_connection: 12,
            bytes_per_input: 8,
            bytes_per_output: 16,
            overhead: 1024,
        }
    }
}

impl MemoryBudget {
    /// Footprint of one layer on its own core.
    pub fn layer(&self, l: &SparseLayer) -> u64 {
        self.overhead
            + l.k() as u64 * self.bytes_per_connection
            + l.inputs as u64 * self.bytes_per_input
            + l.outputs as u64 * self.bytes_per_output
    }

    /// Footprint of the whole model on a single core: one overhead, and
    /// hidden buffers shared between the layers on either side.
    pub fn model(&self, net: &SparseConnectome) -> u64 {
        let arch = net.arch();
        self.overhead
            + net.active() as u64 * self.bytes_per_connection
            + arch[0] as u64 * self.bytes_per_input
            + arch[1..].iter().map(|&n| n as u64).sum::<u64>() * self.bytes_per_output
    }

    pub fn per_layer(&self, net: &SparseConnectome) -> Vec<u64> {
        net.layers.iter().map(|l| self.layer(l)).collect()
    }

    /// Fails if any layer on its own core exceeds the cap.
    pub fn check_per_core(&self, net: &SparseConnectome) -> Result<()> {
        for (i, bytes) in self.per_layer(net).into_iter().enumerate() {
            if bytes > self.cap {
                return Err(RewireError::BudgetExceeded {
                    scope: format!("layer {i}"),
                    bytes,
                    cap: self.cap,
                });
            }
        }
        Ok(())
    }
}
