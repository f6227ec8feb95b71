//! Application graph to machine: partition, place, assign keys, route.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use evfabric_core::{
    ChipCoord, LinkSet, MachineConfig, PeId, RoutingEntry, RoutingTable, ShortestPathTree,
    TorusDims,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SnnError};
use crate::network::{Expanded, Network};

/// SRAM footprint estimate of a vertex:
/// `vertex_overhead + Σ_neurons (neuron_bytes + slot_bytes·slots + synapse_bytes·in_degree)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SramCost {
    pub vertex_overhead: u64,
    pub neuron_bytes: u64,
    /// Per neuron per input ring-buffer slot.
    pub slot_bytes: u64,
    pub synapse_bytes: u64,
    /// Bytes available per PE; `None` uses the machine's SRAM size.
    pub budget: Option<u64>,
    pub max_neurons_per_vertex: Option<u32>,
}

impl Default for SramCost {
    fn default() -> Self {
        Self {
            vertex_overhead: 2048,
            neuron_bytes: 16,
            slot_bytes: 4,
            synapse_bytes: 8,
            budget: None,
            max_neurons_per_vertex: None,
        }
    }
}

impl SramCost {
    /// Ring-buffer slots for a population whose longest incoming delay is
    /// `max_delay`.
    pub fn slots(max_delay: u16) -> u64 {
        max_delay.max(1) as u64 + 1
    }

    /// Per-neuron byte cost of every neuron in population `pop`.
    pub fn neuron_costs(&self, net: &Network, ex: &Expanded, pop: usize) -> Vec<u64> {
        let slots = Self::slots(ex.max_delay_into(pop));
        ex.in_degree(pop, net.populations[pop].size)
            .into_iter()
            .map(|d| self.neuron_bytes + self.slot_bytes * slots + self.synapse_bytes * d)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineVertex {
    pub population: usize,
    pub lo: u32,
    pub hi: u32,
    pub sram_bytes: u64,
}

impl MachineVertex {
    pub fn len(&self) -> u32 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineEdge {
    pub pre: usize,
    pub post: usize,
    pub synapses: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineGraph {
    pub vertices: Vec<MachineVertex>,
    /// Sorted by `(pre, post)`; only vertex pairs joined by ≥ 1 synapse.
    pub edges: Vec<MachineEdge>,
}

impl MachineGraph {
    /// Vertex hosting neuron `index` of population `pop`.
    pub fn vertex_of(&self, pop: usize, index: u32) -> Option<usize> {
        self.vertices
            .iter()
            .position(|v| v.population == pop && (v.lo..v.hi).contains(&index))
    }

    pub fn targets(&self, pre: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.pre == pre).map(|e| e.post)
    }
}

/// Greedy contiguous split of each population so every vertex fits the
/// budget. With additive per-neuron costs this yields the fewest vertices.
pub fn partition(net: &Network, ex: &Expanded, cost: &SramCost, budget: u64) -> Result<MachineGraph> {
    let mut vertices = Vec::new();
    for (pi, pop) in net.populations.iter().enumerate() {
        let costs = cost.neuron_costs(net, ex, pi);
        let max_len = cost.max_neurons_per_vertex.unwrap_or(u32::MAX).max(1);
        let mut lo = 0u32;
        while lo < pop.size {
            let mut bytes = cost.vertex_overhead;
            let mut hi = lo;
            while hi < pop.size && hi - lo < max_len && bytes + costs[hi as usize] <= budget {
                bytes += costs[hi as usize];
                hi += 1;
            }
            if hi == lo {
                return Err(SnnError::Unpartitionable {
                    population: pop.name.clone(),
                    neuron: lo,
                    bytes: cost.vertex_overhead + costs[lo as usize],
                    budget,
                });
            }
            vertices.push(MachineVertex {
                population: pi,
                lo,
                hi,
                sram_bytes: bytes,
            });
            lo = hi;
        }
    }
    let mut graph = MachineGraph {
        vertices,
        edges: Vec::new(),
    };
    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let lookup = VertexLookup::new(&graph, net.populations.len());
    for p in &ex.projections {
        for s in &p.synapses {
            let a = lookup.get(p.pre, s.pre);
            let b = lookup.get(p.post, s.post);
            *counts.entry((a, b)).or_insert(0) += 1;
        }
    }
    graph.edges = counts
        .into_iter()
        .map(|((pre, post), synapses)| MachineEdge {
            pre,
            post,
            synapses,
        })
        .collect();
    Ok(graph)
}

/// Neuron to vertex lookup by binary search over each population's ranges.
pub(crate) struct VertexLookup {
    /// Per population: `(lo, vertex id)` sorted by `lo`.
    starts: Vec<Vec<(u32, usize)>>,
}

impl VertexLookup {
    pub fn new(graph: &MachineGraph, populations: usize) -> Self {
        let mut starts = vec![Vec::new(); populations];
        for (i, v) in graph.vertices.iter().enumerate() {
            starts[v.population].push((v.lo, i));
        }
        Self { starts }
    }

    pub fn get(&self, pop: usize, index: u32) -> usize {
        let s = &self.starts[pop];
        let at = s.partition_point(|(lo, _)| *lo <= index);
        s[at - 1].1
    }
}

/// Vertex id to PE.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub pes: Vec<PeId>,
}

fn all_pes(cfg: &MachineConfig) -> Vec<PeId> {
    let mut pes: Vec<PeId> = cfg
        .dims()
        .chips()
        .flat_map(|c| (0..cfg.cores_per_chip).map(move |core| PeId { chip: c, core }))
        .collect();
    pes.sort();
    pes
}

/// First-fit over PEs in `(chip_y, chip_x, core)` order.
pub fn place(graph: &MachineGraph, cfg: &MachineConfig) -> Result<Placement> {
    let pes = all_pes(cfg);
    if graph.vertices.len() > pes.len() {
        return Err(SnnError::MachineTooSmall {
            vertices: graph.vertices.len(),
            pes: pes.len(),
        });
    }
    Ok(Placement {
        pes: pes[..graph.vertices.len()].to_vec(),
    })
}

/// Uniformly random injective placement.
pub fn place_random(graph: &MachineGraph, cfg: &MachineConfig, seed: u64) -> Result<Placement> {
    let mut pes = all_pes(cfg);
    if graph.vertices.len() > pes.len() {
        return Err(SnnError::MachineTooSmall {
            vertices: graph.vertices.len(),
            pes: pes.len(),
        });
    }
    pes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pes.truncate(graph.vertices.len());
    Ok(Placement { pes })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyBlock {
    pub base: u32,
    /// Bits of the neuron-index field.
    pub width: u8,
}

impl KeyBlock {
    pub fn mask(&self) -> u32 {
        !((1u64 << self.width) - 1) as u32
    }

    pub fn key(&self, local: u32) -> u32 {
        debug_assert!((local as u64) < 1u64 << self.width);
        self.base | local
    }

    /// Local neuron index if `key` belongs to this block.
    pub fn local(&self, key: u32) -> Option<u32> {
        (key & self.mask() == self.base).then_some(key & !self.mask())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMap {
    pub blocks: Vec<KeyBlock>,
}

/// Sequential power-of-two aligned key blocks, one per vertex.
pub fn assign_keys(graph: &MachineGraph) -> Result<KeyMap> {
    let mut next = 0u64;
    let mut blocks = Vec::with_capacity(graph.vertices.len());
    for (i, v) in graph.vertices.iter().enumerate() {
        let width = (u32::BITS - (v.len().max(2) - 1).leading_zeros()) as u8;
        let size = 1u64 << width;
        let base = next.div_ceil(size) * size;
        if base + size > 1 << 32 {
            return Err(SnnError::KeySpaceExhausted(i));
        }
        blocks.push(KeyBlock {
            base: base as u32,
            width,
        });
        next = base + size;
    }
    Ok(KeyMap { blocks })
}

/// One routing table per chip, indexed like `TorusDims::index`.
pub fn build_routing_tables(
    graph: &MachineGraph,
    placement: &Placement,
    keys: &KeyMap,
    dims: TorusDims,
) -> Result<Vec<RoutingTable>> {
    let mut tables = vec![RoutingTable::new(); dims.chip_count()];
    for (src, block) in keys.blocks.iter().enumerate() {
        let targets: BTreeSet<PeId> = graph.targets(src).map(|t| placement.pes[t]).collect();
        if targets.is_empty() {
            continue;
        }
        let root = placement.pes[src].chip;
        let tree = ShortestPathTree::new(root, dims);
        let mut outputs: BTreeMap<usize, (LinkSet, BTreeSet<u16>)> = BTreeMap::new();
        outputs.entry(dims.index(root)).or_default();
        for t in &targets {
            for (chip, port) in tree.path(t.chip) {
                outputs.entry(dims.index(chip)).or_default().0 |= LinkSet::of(port);
            }
            outputs.entry(dims.index(t.chip)).or_default().1.insert(t.core);
        }
        for (chip, (links, local)) in outputs {
            if links.is_empty() && local.is_empty() {
                continue;
            }
            tables[chip].push(RoutingEntry::new(block.base, block.mask(), links, local)?)?;
        }
    }
    Ok(tables)
}

/// Everything needed to load a network onto a machine.
#[derive(Clone, Debug)]
pub struct Mapping {
    pub expanded: Expanded,
    pub graph: MachineGraph,
    pub placement: Placement,
    pub keys: KeyMap,
    pub tables: Vec<RoutingTable>,
    pub dims: TorusDims,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementStrategy {
    #[default]
    FirstFit,
    Random { seed: u64 },
}

pub fn map_network(
    net: &Network,
    cfg: &MachineConfig,
    cost: &SramCost,
    strategy: PlacementStrategy,
) -> Result<Mapping> {
    cfg.validate()?;
    let expanded = net.expand()?;
    let budget = cost.budget.unwrap_or(cfg.sram_bytes as u64).min(cfg.sram_bytes as u64);
    let graph = partition(net, &expanded, cost, budget)?;
    let placement = match strategy {
        PlacementStrategy::FirstFit => place(&graph, cfg)?,
        PlacementStrategy::Random { seed } => place_random(&graph, cfg, seed)?,
    };
    let keys = assign_keys(&graph)?;
    let dims = cfg.dims();
    let tables = build_routing_tables(&graph, &placement, &keys, dims)?;
    Ok(Mapping {
        expanded,
        graph,
        placement,
        keys,
        tables,
        dims,
    })
}

#[derive(Serialize)]
struct PlacementRow<'a> {
    vertex: usize,
    population: &'a str,
    lo: u32,
    hi: u32,
    chip_x: u16,
    chip_y: u16,
    core: u16,
    sram_bytes: u64,
}

#[derive(Serialize)]
struct ChipTable<'a> {
    chip_x: u16,
    chip_y: u16,
    entries: &'a [RoutingEntry],
}

impl Mapping {
    pub fn placement_json(&self, net: &Network) -> serde_json::Value {
        let rows: Vec<PlacementRow> = self
            .graph
            .vertices
            .iter()
            .zip(&self.placement.pes)
            .enumerate()
            .map(|(i, (v, pe))| PlacementRow {
                vertex: i,
                population: &net.populations[v.population].name,
                lo: v.lo,
                hi: v.hi,
                chip_x: pe.chip.x,
                chip_y: pe.chip.y,
                core: pe.core,
                sram_bytes: v.sram_bytes,
            })
            .collect();
        serde_json::to_value(rows).expect("plain data")
    }

    /// Non-empty tables only, in chip index order.
    pub fn tables_json(&self) -> serde_json::Value {
        let rows: Vec<ChipTable> = self
            .tables
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_empty())
            .map(|(i, t)| {
                let c: ChipCoord = self.dims.coord(i);
                ChipTable {
                    chip_x: c.x,
                    chip_y: c.y,
                    entries: &t.entries,
                }
            })
            .collect();
        serde_json::to_value(rows).expect("plain data")
    }

    pub fn write_keymap_csv<W: Write>(&self, net: &Network, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vertex", "population", "lo", "hi", "base", "width", "mask"])?;
        for (i, (v, k)) in self.graph.vertices.iter().zip(&self.keys.blocks).enumerate() {
            w.write_record([
                i.to_string(),
                net.populations[v.population].name.clone(),
                v.lo.to_string(),
                v.hi.to_string(),
                format!("{:#010x}", k.base),
                k.width.to_string(),
                format!("{:#010x}", k.mask()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
