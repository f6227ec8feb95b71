//! Mapped networks running on the fabric: packets queue spikes, timer ticks
//! expand them through synaptic rows and update the neurons.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use evfabric_core::energy::{account, CostModel, EnergyReport};
use evfabric_core::trace::CommLog;
use evfabric_core::{
    Activity, Cycles, Machine, MachineConfig, Packet, PeContext, PeProgram, Result as FabricResult,
    TraceRecord,
};
use evfabric_core::FabricError;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::lif::{lif_step, process_spike, LifState, SourceRows, SynapseRows, SynapseWord};
use crate::mapping::{map_network, KeyBlock, Mapping, PlacementStrategy, SramCost, VertexLookup};
use crate::network::{LifParams, Network};

/// Core cycles charged per unit of work.
pub const CYCLES_PER_PACKET: u64 = 20;
pub const CYCLES_PER_SYNAPSE: u64 = 4;
pub const CYCLES_PER_NEURON: u64 = 2;
pub const CYCLES_PER_TICK: u64 = 50;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DvfsPolicy {
    /// Every PE stays at level 0.
    #[default]
    AlwaysMax,
    /// After a tick with no input and no output a PE drops to the slowest
    /// level; an arriving spike raises it back to level 0.
    IdleDown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunOptions {
    pub ticks: u64,
    /// Cycles per tick.
    pub dt: Cycles,
    pub sram: SramCost,
    pub placement: PlacementStrategy,
    pub dvfs: DvfsPolicy,
    pub trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            ticks: 100,
            dt: 10_000,
            sram: SramCost::default(),
            placement: PlacementStrategy::FirstFit,
            dvfs: DvfsPolicy::AlwaysMax,
            trace: false,
        }
    }
}

/// One machine vertex running on one PE.
pub struct VertexProgram {
    gid_lo: u32,
    params: LifParams,
    source: bool,
    state: LifState,
    rows: SynapseRows,
    out_key: Option<KeyBlock>,
    /// Forced spikes by tick, local indices ascending.
    stimulus: BTreeMap<u64, Vec<u32>>,
    /// `(emit tick, pre gid, block, local pre)`.
    queued: Vec<(u32, u32, usize, u32)>,
    raster: Vec<(u64, u32)>,
    unknown_keys: u64,
    ticks: u64,
    /// Last tick whose timer has run.
    done_tick: u64,
    dt: Cycles,
    sram_bytes: u32,
    dvfs: DvfsPolicy,
}

impl VertexProgram {
    pub fn raster(&self) -> &[(u64, u32)] {
        &self.raster
    }

    pub fn unknown_keys(&self) -> u64 {
        self.unknown_keys
    }

    fn slowest(ctx: &PeContext<'_>) -> usize {
        ctx.config().dvfs.len() - 1
    }
}

fn late(ctx: &PeContext<'_>, emitted: u32, now: u64) -> FabricError {
    FabricError::program(ctx.pe(), SnnError::LateSpike { emitted, now }.to_string())
}

impl PeProgram for VertexProgram {
    fn sram_bytes(&self) -> u32 {
        self.sram_bytes
    }

    fn on_start(&mut self, ctx: &mut PeContext<'_>) -> FabricResult<()> {
        if self.ticks > 0 {
            ctx.schedule_timer(self.dt, 1)?;
        }
        Ok(())
    }

    fn on_packet(&mut self, ctx: &mut PeContext<'_>, pkt: &Packet) -> FabricResult<()> {
        ctx.consume(CYCLES_PER_PACKET);
        if self.dvfs == DvfsPolicy::IdleDown {
            ctx.set_perf_level(0)?;
        }
        let Some((block, local)) = self.rows.lookup(pkt.key) else {
            self.unknown_keys += 1;
            ctx.count("unknown_key", 1);
            return Ok(());
        };
        let emit = pkt.word(0).unwrap_or(0);
        if (emit as u64) < self.done_tick {
            return Err(late(ctx, emit, self.done_tick));
        }
        self.queued
            .push((emit, self.rows.sources[block].gid_lo + local, block, local));
        Ok(())
    }

    fn on_timer(&mut self, ctx: &mut PeContext<'_>, tick: u64) -> FabricResult<()> {
        ctx.consume(CYCLES_PER_TICK);
        self.done_tick = tick;
        let had_input = !self.queued.is_empty();
        self.queued.sort_unstable_by_key(|q| (q.0, q.1));
        let mut keep = Vec::new();
        let mut synapses = 0u64;
        for q in std::mem::take(&mut self.queued) {
            let emit = q.0 as u64;
            if emit >= tick {
                keep.push(q);
                continue;
            }
            if emit + 1 < tick {
                return Err(late(ctx, q.0, tick));
            }
            let row = self.rows.row(q.2, q.3);
            synapses += row.len() as u64;
            process_spike(&mut self.state, row, emit);
        }
        self.queued = keep;
        ctx.count("synapse", synapses);
        ctx.consume(CYCLES_PER_SYNAPSE * synapses);

        let forced = self.stimulus.remove(&tick).unwrap_or_default();
        let n = self.state.len() as u64;
        let spikes = lif_step(&mut self.state, &self.params, self.source, &forced, tick);
        ctx.count("neuron_update", n);
        ctx.consume(CYCLES_PER_NEURON * n);
        for &i in &spikes {
            self.raster.push((tick, self.gid_lo + i));
            if let Some(k) = self.out_key {
                ctx.send_multicast(k.key(i), &(tick as u32).to_le_bytes())?;
            }
        }
        if self.dvfs == DvfsPolicy::IdleDown {
            let busy = had_input || !spikes.is_empty();
            let level = if busy { 0 } else { Self::slowest(ctx) };
            ctx.set_perf_level(level)?;
        }
        if tick < self.ticks {
            ctx.schedule_timer((tick + 1) * self.dt, tick + 1)?;
        }
        Ok(())
    }
}

/// Builds the per-vertex programs of a mapping.
pub fn build_programs(
    net: &Network,
    mapping: &Mapping,
    stimulus: &[(u64, u32)],
    opts: &RunOptions,
) -> Result<Vec<VertexProgram>> {
    let graph = &mapping.graph;
    let ex = &mapping.expanded;
    let total = ex.neuron_count(net);
    let lookup = VertexLookup::new(graph, net.populations.len());

    // Incoming rows per post vertex, keyed by source vertex.
    let mut incoming: Vec<BTreeMap<usize, Vec<Vec<(u32, u64, SynapseWord)>>>> =
        vec![BTreeMap::new(); graph.vertices.len()];
    let mut index = 0u64;
    for p in &ex.projections {
        for s in &p.synapses {
            let a = lookup.get(p.pre, s.pre);
            let b = lookup.get(p.post, s.post);
            let (va, vb) = (&graph.vertices[a], &graph.vertices[b]);
            let rows = incoming[b]
                .entry(a)
                .or_insert_with(|| vec![Vec::new(); va.len() as usize]);
            rows[(s.pre - va.lo) as usize].push((
                s.post - vb.lo,
                index,
                SynapseWord {
                    post: s.post - vb.lo,
                    weight: s.weight,
                    delay: s.delay,
                },
            ));
            index += 1;
        }
    }

    let mut forced: Vec<BTreeMap<u64, Vec<u32>>> = vec![BTreeMap::new(); graph.vertices.len()];
    for &(tick, gid) in stimulus {
        if tick == 0 || tick > opts.ticks {
            return Err(SnnError::Stimulus(format!("tick {tick} outside 1..={}", opts.ticks)));
        }
        if gid >= total {
            return Err(SnnError::Stimulus(format!("neuron {gid} does not exist")));
        }
        let pop = ex.offsets.partition_point(|&o| o <= gid) - 1;
        let local = gid - ex.offsets[pop];
        let v = lookup.get(pop, local);
        forced[v]
            .entry(tick)
            .or_default()
            .push(local - graph.vertices[v].lo);
    }

    let mut programs = Vec::with_capacity(graph.vertices.len());
    for (vi, (v, inc)) in graph.vertices.iter().zip(incoming).enumerate() {
        let pop = &net.populations[v.population];
        let mut sources: Vec<SourceRows> = inc
            .into_iter()
            .map(|(src, rows)| {
                let sv = &graph.vertices[src];
                SourceRows {
                    key: mapping.keys.blocks[src],
                    gid_lo: ex.offsets[sv.population] + sv.lo,
                    rows: rows
                        .into_iter()
                        .map(|mut r| {
                            r.sort_by_key(|w| (w.0, w.1));
                            r.into_iter().map(|w| w.2).collect()
                        })
                        .collect(),
                }
            })
            .collect();
        sources.sort_by_key(|s| s.key.base);
        let mut stim = std::mem::take(&mut forced[vi]);
        for list in stim.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        let slots = SramCost::slots(ex.max_delay_into(v.population)) as usize;
        let has_targets = graph.targets(vi).next().is_some();
        programs.push(VertexProgram {
            gid_lo: ex.offsets[v.population] + v.lo,
            params: pop.params,
            source: pop.source,
            state: LifState::new(v.len() as usize, slots),
            rows: SynapseRows { sources },
            out_key: has_targets.then_some(mapping.keys.blocks[vi]),
            stimulus: stim,
            queued: Vec::new(),
            raster: Vec::new(),
            unknown_keys: 0,
            ticks: opts.ticks,
            done_tick: 0,
            dt: opts.dt,
            sram_bytes: u32::try_from(v.sram_bytes).unwrap_or(u32::MAX),
            dvfs: opts.dvfs,
        });
    }
    Ok(programs)
}

#[derive(Debug)]
pub struct SnnRun {
    /// `(tick, global neuron id)`, sorted.
    pub raster: Vec<(u64, u32)>,
    pub mapping: Mapping,
    pub activity: Activity,
    pub energy: EnergyReport,
    pub unknown_keys: u64,
    pub comm: CommLog,
    pub trace: Option<Vec<TraceRecord>>,
}

/// Map, load, stimulate, simulate and collect.
pub fn run_snn(
    net: &Network,
    cfg: &MachineConfig,
    stimulus: &[(u64, u32)],
    opts: &RunOptions,
    model: &CostModel,
) -> Result<SnnRun> {
    let mapping = map_network(net, cfg, &opts.sram, opts.placement)?;
    let programs = build_programs(net, &mapping, stimulus, opts)?;
    let mut m = Machine::new(cfg.clone())?;
    if opts.trace {
        m.enable_trace();
    }
    for (i, t) in mapping.tables.iter().enumerate() {
        if !t.is_empty() {
            m.set_table(mapping.dims.coord(i), t.clone())?;
        }
    }
    for (pe, p) in mapping.placement.pes.iter().zip(programs) {
        m.load(*pe, Box::new(p))?;
    }
    m.boot()?;
    m.run_until_idle()?;
    let duration = m.end_time().max((opts.ticks + 1) * opts.dt);
    let activity = m.activity_until(duration);
    let energy = account(&activity, model)?;
    let mut raster = Vec::new();
    let mut unknown_keys = 0;
    for pe in &mapping.placement.pes {
        let p: &VertexProgram = m.program(*pe).expect("vertex program");
        raster.extend_from_slice(p.raster());
        unknown_keys += p.unknown_keys();
    }
    raster.sort_unstable();
    Ok(SnnRun {
        raster,
        activity,
        energy,
        unknown_keys,
        comm: m.comm_log().clone(),
        trace: m.trace().map(|t| t.to_vec()),
        mapping,
    })
}

pub fn read_spikes_csv<R: Read>(input: R) -> Result<Vec<(u64, u32)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let (tick, key): (u64, u32) = row?;
        out.push((tick, key));
    }
    Ok(out)
}

pub fn write_spikes_csv<W: Write>(spikes: &[(u64, u32)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tick", "key"])?;
    for (t, k) in spikes {
        w.write_record([t.to_string(), k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
