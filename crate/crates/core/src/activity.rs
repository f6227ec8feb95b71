//! Per-PE activity counters collected by the kernel; the input of energy
//! accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::event::Cycles;
use crate::topology::PeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeActivity {
    pub pe: PeId,
    /// Event and operation counts by class name.
    pub counts: BTreeMap<String, u64>,
    /// Reference cycles spent running handlers, per DVFS level.
    pub busy_cycles: Vec<u64>,
    /// Reference cycles spent at each DVFS level (busy or idle).
    pub level_cycles: Vec<u64>,
    pub dma_bytes: u64,
    pub level_transitions: u64,
}

impl PeActivity {
    pub fn count(&self, class: &str) -> u64 {
        self.counts.get(class).copied().unwrap_or(0)
    }

    pub fn total_busy(&self) -> u64 {
        self.busy_cycles.iter().sum()
    }
}

/// Activity of all loaded PEs over `[0, duration)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub duration: Cycles,
    pub sleep_enabled: bool,
    pub pes: Vec<PeActivity>,
}

impl Activity {
    pub fn count(&self, class: &str) -> u64 {
        self.pes.iter().map(|p| p.count(class)).sum()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct PeCounters {
    pub counts: BTreeMap<&'static str, u64>,
    pub busy: Vec<u64>,
    pub level_cycles: Vec<u64>,
    pub level: usize,
    pub level_since: Cycles,
    pub dma_bytes: u64,
    pub transitions: u64,
}

impl PeCounters {
    pub fn new(levels: usize, level: usize, now: Cycles) -> Self {
        Self {
            counts: BTreeMap::new(),
            busy: vec![0; levels],
            level_cycles: vec![0; levels],
            level,
            level_since: now,
            dma_bytes: 0,
            transitions: 0,
        }
    }

    pub fn bump(&mut self, class: &'static str, n: u64) {
        *self.counts.entry(class).or_insert(0) += n;
    }

    pub fn switch_level(&mut self, level: usize, now: Cycles) {
        if level == self.level {
            return;
        }
        self.level_cycles[self.level] += now - self.level_since;
        self.level = level;
        self.level_since = now;
        self.transitions += 1;
    }

    pub fn snapshot(&self, pe: PeId, duration: Cycles) -> PeActivity {
        let mut level_cycles = self.level_cycles.clone();
        level_cycles[self.level] += duration.saturating_sub(self.level_since);
        PeActivity {
            pe,
            counts: self
                .counts
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            busy_cycles: self.busy.clone(),
            level_cycles,
            dma_bytes: self.dma_bytes,
            level_transitions: self.transitions,
        }
    }
}
