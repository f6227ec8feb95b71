use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FabricError, Result};
use crate::event::Cycles;
use crate::topology::TorusDims;

/// One DVFS operating point. Handler work measured in core cycles takes
/// `cycles * cycle_multiplier` reference cycles at this level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvfsLevel {
    pub cycle_multiplier: u64,
}

/// Machine configuration, read from JSON. Every field has a default.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachineConfig {
    pub width: u16,
    pub height: u16,
    pub cores_per_chip: u16,
    pub sram_bytes: u32,
    pub router_latency: Cycles,
    pub link_latency: Cycles,
    /// On-chip delivery time of an interrupt between two cores.
    pub noc_latency: Cycles,
    pub dma_base_latency: Cycles,
    pub dma_bytes_per_cycle: u64,
    /// Level 0 is the fastest.
    pub dvfs: Vec<DvfsLevel>,
    pub default_perf_level: usize,
    /// Idle cores sleep; when false they spin at their active power.
    pub sleep_enabled: bool,
    pub seed: u64,
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            width: 1,
            height: 1,
            cores_per_chip: 152,
            sram_bytes: 128 * 1024,
            router_latency: 10,
            link_latency: 20,
            noc_latency: 4,
            dma_base_latency: 100,
            dma_bytes_per_cycle: 8,
            dvfs: vec![
                DvfsLevel {
                    cycle_multiplier: 1,
                },
                DvfsLevel {
                    cycle_multiplier: 2,
                },
            ],
            default_perf_level: 0,
            sleep_enabled: true,
            seed: 0,
        }
    }
}

impl MachineConfig {
    pub fn with_dims(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            ..Self::default()
        }
    }

    pub fn dims(&self) -> TorusDims {
        TorusDims {
            width: self.width,
            height: self.height,
        }
    }

    pub fn total_pes(&self) -> usize {
        self.dims().chip_count() * self.cores_per_chip as usize
    }

    pub fn validate(&self) -> Result<()> {
        TorusDims::new(self.width, self.height)?;
        let bad = |msg: &str| Err(FabricError::Config(msg.to_string()));
        if self.cores_per_chip == 0 {
            return bad("cores_per_chip must be >= 1");
        }
        if self.sram_bytes == 0 {
            return bad("sram_bytes must be > 0");
        }
        if self.dma_bytes_per_cycle == 0 {
            return bad("dma_bytes_per_cycle must be >= 1");
        }
        if self.dvfs.is_empty() {
            return bad("dvfs table must have at least one level");
        }
        if self.dvfs.iter().any(|l| l.cycle_multiplier == 0) {
            return bad("dvfs cycle_multiplier must be >= 1");
        }
        if self.default_perf_level >= self.dvfs.len() {
            return Err(FabricError::BadLevel {
                level: self.default_perf_level,
                levels: self.dvfs.len(),
            });
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| FabricError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FabricError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let c = MachineConfig::from_json(r#"{"width": 2, "height": 3}"#).unwrap();
        assert_eq!(c.cores_per_chip, 152);
        assert_eq!(c.sram_bytes, 131072);
        assert_eq!(c.total_pes(), 6 * 152);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(MachineConfig::from_json(r#"{"widht": 2}"#).is_err());
        assert!(MachineConfig::from_json(r#"{"width": 0}"#).is_err());
        assert!(MachineConfig::from_json(r#"{"default_perf_level": 7}"#).is_err());
        assert!(MachineConfig::from_json(r#"{"dvfs": []}"#).is_err());
    }
}
