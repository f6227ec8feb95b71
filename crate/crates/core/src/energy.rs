//! Event-level energy cost model.
//!
//! Energies are integers in abstract units (think picojoules), so a report is
//! reproducible from its counts and the model's coefficients with no rounding.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{Activity, PeActivity};
use crate::config::MachineConfig;
use crate::error::FabricError;
use crate::event::Cycles;
use crate::kernel::{Machine, PeProgram};
use crate::topology::PeId;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("cost model has no energy for event class `{0}`")]
    UnknownEventClass(String),
    #[error("activity uses DVFS level {level} but the cost model has {levels} levels")]
    BadLevel { level: usize, levels: usize },
    #[error("invalid cost model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error("workload failed: {0}")]
    Workload(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    #[serde(default)]
    pub note: String,
    /// Energy per occurrence, keyed by event/operation class name.
    pub event_energy: BTreeMap<String, u64>,
    /// Energy per reference cycle while running, per DVFS level.
    pub active_power_per_cycle: Vec<u64>,
    pub sleep_power_per_cycle: u64,
    pub dma_energy_per_byte: u64,
    #[serde(default)]
    pub transition_energy: u64,
}

impl Default for CostModel {
    /// Illustrative coefficients, not measurements.
    fn default() -> Self {
        let event_energy = [
            ("packet_rx", 20),
            ("dma_done", 10),
            ("timer", 40),
            ("irq", 10),
            ("user", 10),
            ("packet_tx", 30),
            ("synapse", 5),
            ("neuron_update", 8),
            ("mac", 1),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            note: "illustrative, not measured".to_string(),
            event_energy,
            active_power_per_cycle: vec![10, 4],
            sleep_power_per_cycle: 1,
            dma_energy_per_byte: 2,
            transition_energy: 0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), EnergyError> {
        let Some(&min_active) = self.active_power_per_cycle.iter().min() else {
            return Err(EnergyError::InvalidModel(
                "active_power_per_cycle is empty".into(),
            ));
        };
        if self.sleep_power_per_cycle >= min_active {
            return Err(EnergyError::InvalidModel(format!(
                "sleep power {} must be below the lowest active power {min_active}",
                self.sleep_power_per_cycle
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, EnergyError> {
        let m: Self =
            serde_json::from_str(text).map_err(|e| EnergyError::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, EnergyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnergyError::InvalidModel(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn class_energy(&self, class: &str) -> Result<u64, EnergyError> {
        self.event_energy
            .get(class)
            .copied()
            .ok_or_else(|| EnergyError::UnknownEventClass(class.to_string()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub events: u64,
    pub cycles: u64,
    pub dma: u64,
    pub transitions: u64,
    pub total: u64,
}

impl EnergyBreakdown {
    fn add(&mut self, o: &EnergyBreakdown) {
        self.events += o.events;
        self.cycles += o.cycles;
        self.dma += o.dma;
        self.transitions += o.transitions;
        self.total += o.total;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeEnergy {
    pub pe: PeId,
    pub busy_cycles: Vec<u64>,
    /// Idle cycles spent spinning, per level (only when sleep is disabled).
    pub idle_cycles: Vec<u64>,
    pub sleep_cycles: u64,
    pub counts: BTreeMap<String, u64>,
    pub dma_bytes: u64,
    pub level_transitions: u64,
    pub energy: EnergyBreakdown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub duration: Cycles,
    pub sleep_enabled: bool,
    pub busy_cycles: u64,
    pub sleep_cycles: u64,
    pub idle_cycles: u64,
    pub counts: BTreeMap<String, u64>,
    pub energy: EnergyBreakdown,
    pub pes: Vec<PeEnergy>,
}

impl EnergyReport {
    pub fn total(&self) -> u64 {
        self.energy.total
    }

    /// Energy of the events of one class.
    pub fn class_energy(&self, class: &str, model: &CostModel) -> u64 {
        self.counts.get(class).copied().unwrap_or(0) * model.event_energy.get(class).copied().unwrap_or(0)
    }
}

fn account_pe(
    p: &PeActivity,
    duration: Cycles,
    sleep_enabled: bool,
    model: &CostModel,
) -> Result<PeEnergy, EnergyError> {
    let levels = model.active_power_per_cycle.len();
    if p.busy_cycles.len() > levels || p.level_cycles.len() > levels {
        return Err(EnergyError::BadLevel {
            level: p.busy_cycles.len().max(p.level_cycles.len()) - 1,
            levels,
        });
    }
    let mut e = EnergyBreakdown::default();
    for (class, n) in &p.counts {
        e.events += n * model.class_energy(class)?;
    }
    let busy_total: u64 = p.busy_cycles.iter().sum();
    let mut idle_cycles = vec![0; p.busy_cycles.len()];
    let mut sleep_cycles = 0;
    for (l, b) in p.busy_cycles.iter().enumerate() {
        e.cycles += b * model.active_power_per_cycle[l];
    }
    if sleep_enabled {
        sleep_cycles = duration.saturating_sub(busy_total);
        e.cycles += sleep_cycles * model.sleep_power_per_cycle;
    } else {
        for (l, idle) in idle_cycles.iter_mut().enumerate() {
            let at_level = p.level_cycles.get(l).copied().unwrap_or(0);
            *idle = at_level.saturating_sub(p.busy_cycles[l]);
            e.cycles += *idle * model.active_power_per_cycle[l];
        }
    }
    e.dma = p.dma_bytes * model.dma_energy_per_byte;
    e.transitions = p.level_transitions * model.transition_energy;
    e.total = e.events + e.cycles + e.dma + e.transitions;
    Ok(PeEnergy {
        pe: p.pe,
        busy_cycles: p.busy_cycles.clone(),
        idle_cycles,
        sleep_cycles,
        counts: p.counts.clone(),
        dma_bytes: p.dma_bytes,
        level_transitions: p.level_transitions,
        energy: e,
    })
}

/// Prices an activity record with a cost model.
pub fn account(activity: &Activity, model: &CostModel) -> Result<EnergyReport, EnergyError> {
    let mut pes = Vec::with_capacity(activity.pes.len());
    let mut energy = EnergyBreakdown::default();
    let mut counts = BTreeMap::new();
    let (mut busy, mut sleep, mut idle) = (0, 0, 0);
    for p in &activity.pes {
        let pe = account_pe(p, activity.duration, activity.sleep_enabled, model)?;
        energy.add(&pe.energy);
        for (k, v) in &pe.counts {
            *counts.entry(k.clone()).or_insert(0) += v;
        }
        busy += pe.busy_cycles.iter().sum::<u64>();
        sleep += pe.sleep_cycles;
        idle += pe.idle_cycles.iter().sum::<u64>();
        pes.push(pe);
    }
    Ok(EnergyReport {
        duration: activity.duration,
        sleep_enabled: activity.sleep_enabled,
        busy_cycles: busy,
        sleep_cycles: sleep,
        idle_cycles: idle,
        counts,
        energy,
        pes,
    })
}

/// Result of pushing a fixed set of items through a workload at one batch
/// size.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    pub items: usize,
    pub timesteps_per_item: u64,
    pub energy: u64,
}

/// A workload that processes items in rounds of `batch` parallel copies.
pub trait BatchWorkload {
    fn run(&self, batch: usize, model: &CostModel) -> Result<SweepRun, EnergyError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub batch: usize,
    pub energy_total: u64,
    pub energy_per_item: f64,
    /// Energy per item per simulated timestep.
    pub energy_per_timestep: f64,
}

pub fn batch_sweep<W: BatchWorkload + ?Sized>(
    workload: &W,
    batches: &[usize],
    model: &CostModel,
) -> Result<Vec<SweepPoint>, EnergyError> {
    batches
        .iter()
        .map(|&b| {
            let run = workload.run(b, model)?;
            let per_item = run.energy as f64 / run.items as f64;
            Ok(SweepPoint {
                batch: b,
                energy_total: run.energy,
                energy_per_item: per_item,
                energy_per_timestep: per_item / run.timesteps_per_item as f64,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

struct IdleProgram;

impl PeProgram for IdleProgram {
    fn sram_bytes(&self) -> u32 {
        0
    }
}

/// Items that occupy cores for a fixed time and do nothing.
#[derive(Clone, Debug)]
pub struct IdleWorkload {
    pub items: usize,
    pub cores_per_item: usize,
    pub timesteps: u64,
    pub cycles_per_timestep: Cycles,
}

impl BatchWorkload for IdleWorkload {
    fn run(&self, batch: usize, model: &CostModel) -> Result<SweepRun, EnergyError> {
        let mut energy = 0;
        let mut done = 0;
        while done < self.items {
            let copies = batch.min(self.items - done);
            let cores = (copies * self.cores_per_item) as u16;
            let cfg = MachineConfig {
                cores_per_chip: cores.max(1),
                ..MachineConfig::default()
            };
            let mut m = Machine::new(cfg)?;
            for c in 0..cores {
                m.load(PeId::new(0, 0, c), Box::new(IdleProgram))?;
            }
            m.advance(self.timesteps * self.cycles_per_timestep)?;
            energy += account(&m.activity(), model)?.total();
            done += copies;
        }
        Ok(SweepRun {
            items: self.items,
            timesteps_per_item: self.timesteps,
            energy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pe_activity(counts: &[(&str, u64)], busy: Vec<u64>, level_cycles: Vec<u64>) -> PeActivity {
        PeActivity {
            pe: PeId::new(0, 0, 0),
            counts: counts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            busy_cycles: busy,
            level_cycles,
            dma_bytes: 0,
            level_transitions: 0,
        }
    }

    #[test]
    fn empty_trace_costs_sleep_only() {
        let m = CostModel::default();
        let n_pe = 3;
        let t = 1000;
        let a = Activity {
            duration: t,
            sleep_enabled: true,
            pes: (0..n_pe)
                .map(|_| pe_activity(&[], vec![0, 0], vec![t, 0]))
                .collect(),
        };
        let r = account(&a, &m).unwrap();
        assert_eq!(r.total(), n_pe * t * m.sleep_power_per_cycle);
    }

    #[test]
    fn spikes_add_linearly() {
        let m = CostModel::default();
        let base = Activity {
            duration: 100,
            sleep_enabled: true,
            pes: vec![pe_activity(&[("packet_rx", 7)], vec![10, 0], vec![100, 0])],
        };
        let mut more = base.clone();
        *more.pes[0].counts.get_mut("packet_rx").unwrap() += 25;
        let d = account(&more, &m).unwrap().total() - account(&base, &m).unwrap().total();
        assert_eq!(d, 25 * m.event_energy["packet_rx"]);
    }

    #[test]
    fn unknown_class_is_rejected() {
        let a = Activity {
            duration: 1,
            sleep_enabled: true,
            pes: vec![pe_activity(&[("teleport", 1)], vec![0], vec![1])],
        };
        assert!(matches!(
            account(&a, &CostModel::default()),
            Err(EnergyError::UnknownEventClass(c)) if c == "teleport"
        ));
    }

    #[test]
    fn model_validation() {
        let mut m = CostModel::default();
        m.sleep_power_per_cycle = 4;
        assert!(m.validate().is_err());
        m.active_power_per_cycle.clear();
        assert!(m.validate().is_err());
    }

    #[test]
    fn idle_workload_is_flat_at_sleep_baseline() {
        let m = CostModel::default();
        let w = IdleWorkload {
            items: 12,
            cores_per_item: 2,
            timesteps: 50,
            cycles_per_timestep: 100,
        };
        let pts = batch_sweep(&w, &[1, 2, 3, 4, 6], &m).unwrap();
        let expected = (2 * 50 * 100 * m.sleep_power_per_cycle) as f64;
        for p in pts {
            assert_eq!(p.energy_per_item, expected);
        }
    }
}
