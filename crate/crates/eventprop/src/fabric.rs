//! Training step on the fabric.
//!
//! Each batch copy gets one input core and one core per trained layer, all
//! ticking on phase-aligned timers. Spikes travel up as multicast packets
//! carrying `(tick, time)`. After the horizon the output core computes the
//! loss and runs its adjoint; every core sends one error event per spike it
//! received back to the core that emitted it, in reverse tick order, then an
//! `ERRORS_SENT` interrupt with the count. A core runs its own adjoint once
//! the count is met. Gradients stay in layer-core SRAM until the control core
//! pulls them by DMA, sums them in copy order, applies Adam and pushes the
//! new weights back to every copy.

use evfabric_core::{
    account, BatchWorkload, ChipCoord, CostModel, DmaRequest, EnergyError, EnergyReport, FabricError,
    Irq, LinkSet, Machine, MachineConfig, MemRef, Packet, PeContext, PeId, PeProgram, RoutingEntry, RoutingTable,
    SweepRun,
};
use evfabric_snn::LifParams;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::backward::{incoming_errors, layer_adjoint, output_spike_grads};
use crate::error::{EventpropError, Result};
use crate::event::{spike_payload, ErrorEvent, ERROR_EVENT_BYTES, SPIKE_BYTES};
use crate::forward::{input_spikes, LayerSim, Spike, SpikeRecord};
use crate::loss::{predict, ttfs_loss};
use crate::net::FeedForwardSnn;
use crate::train::{unflatten, EventpropConfig, Sample};

const ERRORS_SENT: u32 = 1;
const GRAD_READY: u32 = 2;
const WEIGHTS: u32 = 3;

const KEY_MASK: u32 = 0xFFFF_F000;
const NEURON_MASK: u32 = !KEY_MASK;

const CYCLES_PER_TICK: u64 = 40;
const CYCLES_PER_NEURON: u64 = 4;
const CYCLES_PER_SYNAPSE: u64 = 2;
const CYCLES_PER_PACKET: u64 = 10;
const CYCLES_PER_WEIGHT: u64 = 2;

const CHIP: ChipCoord = ChipCoord::new(0, 0);

fn key_base(copy: usize, layer: usize) -> u32 {
    (copy as u32) << 16 | (layer as u32) << 12
}

fn f32_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn read_f32s(b: &[u8]) -> Vec<f32> {
    b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
}

fn protocol(pe: PeId, msg: impl Into<String>) -> FabricError {
    FabricError::program(pe, msg)
}

/// Emits the latency-coded input and swallows the returning errors.
pub struct InputProgram {
    spikes: Vec<Spike>,
    next: usize,
    key: u32,
    horizon: u32,
    dt: u64,
    errors: Vec<ErrorEvent>,
    expected: Option<usize>,
}

impl PeProgram for InputProgram {
    fn sram_bytes(&self) -> u32 {
        (self.spikes.len() * 8 + self.spikes.len() * ERROR_EVENT_BYTES) as u32 + 256
    }

    fn on_start(&mut self, ctx: &mut PeContext<'_>) -> evfabric_core::Result<()> {
        ctx.schedule_timer(self.dt, 1)
    }

    fn on_timer(&mut self, ctx: &mut PeContext<'_>, t: u64) -> evfabric_core::Result<()> {
        let t = t as u32;
        ctx.consume(CYCLES_PER_TICK);
        while let Some(s) = self.spikes.get(self.next).filter(|s| s.tick == t) {
            ctx.consume(CYCLES_PER_PACKET);
            ctx.send_multicast(self.key | s.neuron, &spike_payload(s.tick, s.offset))?;
            self.next += 1;
        }
        if t < self.horizon {
            ctx.schedule_timer((t as u64 + 1) * self.dt, t as u64 + 1)?;
        }
        Ok(())
    }

    fn on_packet(&mut self, ctx: &mut PeContext<'_>, pkt: &Packet) -> evfabric_core::Result<()> {
        ctx.consume(CYCLES_PER_PACKET);
        let e = ErrorEvent::from_bytes(pkt.payload()).ok_or_else(|| protocol(ctx.pe(), "malformed error event"))?;
        self.errors.push(e);
        Ok(())
    }

    fn on_irq(&mut self, ctx: &mut PeContext<'_>, irq: &Irq) -> evfabric_core::Result<()> {
        match irq.code {
            ERRORS_SENT => {
                self.expected = Some(irq.args[0] as usize);
                Ok(())
            }
            c => Err(protocol(ctx.pe(), format!("unexpected interrupt {c}"))),
        }
    }
}

/// Per-sample outcome reported to the control core.
#[derive(Clone, Debug, Default, PartialEq)]
struct Outcome {
    loss: f64,
    correct: bool,
}

/// One trained layer of one batch copy.
pub struct LayerProgram {
    copy: usize,
    layer: usize,
    sim: LayerSim,
    weights: Vec<f32>,
    neurons: usize,
    horizon: u32,
    dt: u64,
    /// Key base of this layer's spikes, `None` for the output layer.
    out_key: Option<u32>,
    in_key: u32,
    lower: PeId,
    control: Option<PeId>,
    label: Option<usize>,
    tau_scale: f64,
    t_max: f64,
    eps_rate: f32,
    incoming: Vec<Spike>,
    own: Vec<Spike>,
    g: Vec<f32>,
    received: usize,
    expected: Option<usize>,
    forward_done: bool,
    backward_done: bool,
    grad: Vec<f32>,
    degenerate: usize,
    outcome: Outcome,
}

impl LayerProgram {
    fn grad_addr(&self) -> u32 {
        self.weights.len() as u32 * 4
    }

    fn params(&self) -> LifParams {
        self.sim.params
    }

    fn try_backward(&mut self, ctx: &mut PeContext<'_>) -> evfabric_core::Result<()> {
        if self.backward_done || !self.forward_done || self.expected != Some(self.received) {
            return Ok(());
        }
        self.backward_done = true;
        let n = self.neurons;
        let adj = layer_adjoint(&self.params(), n, &self.own, &self.g, self.horizon, self.eps_rate);
        self.degenerate = adj.degenerate;
        ctx.count("neuron_update", n as u64 * self.horizon as u64);
        ctx.consume(CYCLES_PER_NEURON * n as u64 * self.horizon as u64);
        let errors = incoming_errors(&self.params(), &self.weights, self.sim.pre, &self.incoming, &adj, &mut self.grad);
        ctx.count("synapse", (n * self.incoming.len()) as u64);
        ctx.consume(2 * CYCLES_PER_SYNAPSE * (n * self.incoming.len()) as u64);
        for &(s, value) in &errors {
            let sp = &self.incoming[s];
            let key = self.in_key | sp.neuron;
            ctx.consume(CYCLES_PER_PACKET);
            ctx.send_p2p(self.lower, key, &ErrorEvent { tick: sp.tick, key, value }.to_bytes())?;
        }
        ctx.raise_irq(self.lower, ERRORS_SENT, vec![errors.len() as u32])?;
        let addr = self.grad_addr();
        ctx.sram_write(addr, &f32_bytes(&self.grad))?;
        if let Some(control) = self.control {
            ctx.raise_irq(
                control,
                GRAD_READY,
                vec![
                    self.copy as u32,
                    self.layer as u32,
                    self.outcome.loss.to_bits() as u32,
                    (self.outcome.loss.to_bits() >> 32) as u32,
                    self.outcome.correct as u32,
                    self.degenerate as u32,
                ],
            )?;
        }
        Ok(())
    }

    fn finish_forward(&mut self, ctx: &mut PeContext<'_>) -> evfabric_core::Result<()> {
        self.forward_done = true;
        self.g = vec![0.0; self.own.len()];
        if let Some(label) = self.label {
            let rec = SpikeRecord {
                layers: vec![std::mem::take(&mut self.own)],
            };
            let tau = rec.first_spike_times(self.neurons, self.t_max);
            let (loss, dl) = ttfs_loss(&tau, label, self.tau_scale);
            self.g = output_spike_grads(&rec, &dl);
            self.own = rec.layers.into_iter().next().unwrap();
            self.outcome = Outcome {
                loss,
                correct: predict(&tau) == label,
            };
            ctx.consume(CYCLES_PER_NEURON * 8 * self.neurons as u64);
            self.expected = Some(0);
        }
        self.try_backward(ctx)
    }

    /// Spikes this core emitted (or, for the output, recorded).
    pub fn spikes(&self) -> &[Spike] {
        &self.own
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }
}

impl PeProgram for LayerProgram {
    fn sram_bytes(&self) -> u32 {
        let n = self.neurons;
        // Weights, gradients, membrane and two input slots, plus the record:
        // at most one spike per neuron per tick, 16 bytes each, on both sides.
        let record = 16 * self.horizon as usize * (n + self.sim.pre);
        (8 * self.weights.len() + 12 * n + 4 * record.div_ceil(4) + 4 * n * self.horizon as usize) as u32 + 512
    }

    fn on_start(&mut self, ctx: &mut PeContext<'_>) -> evfabric_core::Result<()> {
        ctx.schedule_timer(self.dt, 1)
    }

    fn on_timer(&mut self, ctx: &mut PeContext<'_>, t: u64) -> evfabric_core::Result<()> {
        let t = t as u32;
        ctx.consume(CYCLES_PER_TICK);
        if t > self.horizon {
            return self.finish_forward(ctx);
        }
        let fired = self.sim.step(t);
        ctx.count("neuron_update", self.neurons as u64);
        ctx.consume(CYCLES_PER_NEURON * self.neurons as u64);
        if let Some(base) = self.out_key {
            for s in &fired {
                ctx.consume(CYCLES_PER_PACKET);
                ctx.send_multicast(base | s.neuron, &spike_payload(s.tick, s.offset))?;
            }
        }
        self.own.extend(fired);
        ctx.schedule_timer((t as u64 + 1) * self.dt, t as u64 + 1)
    }

    fn on_packet(&mut self, ctx: &mut PeContext<'_>, pkt: &Packet) -> evfabric_core::Result<()> {
        ctx.consume(CYCLES_PER_PACKET);
        match pkt.payload().len() {
            SPIKE_BYTES => {
                if pkt.key & KEY_MASK != self.in_key {
                    return Err(protocol(ctx.pe(), format!("spike with foreign key {:#x}", pkt.key)));
                }
                let tick = pkt.word(0).unwrap();
                let s = Spike {
                    tick,
                    neuron: pkt.key & NEURON_MASK,
                    offset: pkt.f32_word(1).unwrap(),
                    v_prev: 0.0,
                    v: 0.0,
                };
                let n = self.sim.receive(&self.weights, &s);
                ctx.count("synapse", n);
                ctx.consume(CYCLES_PER_SYNAPSE * n);
                self.incoming.push(s);
                Ok(())
            }
            ERROR_EVENT_BYTES => {
                let e = ErrorEvent::from_bytes(pkt.payload()).unwrap();
                if !self.forward_done || Some(e.key & KEY_MASK) != self.out_key {
                    return Err(protocol(ctx.pe(), format!("unexpected error event for key {:#x}", e.key)));
                }
                let neuron = e.key & NEURON_MASK;
                let at = self
                    .own
                    .binary_search_by_key(&(e.tick, neuron), |s| (s.tick, s.neuron))
                    .map_err(|_| protocol(ctx.pe(), format!("error for unknown spike ({}, {neuron})", e.tick)))?;
                self.g[at] += e.value;
                self.received += 1;
                self.try_backward(ctx)
            }
            len => Err(protocol(ctx.pe(), format!("unexpected {len}-byte payload"))),
        }
    }

    fn on_irq(&mut self, ctx: &mut PeContext<'_>, irq: &Irq) -> evfabric_core::Result<()> {
        match irq.code {
            ERRORS_SENT => {
                self.expected = Some(irq.args[0] as usize);
                self.try_backward(ctx)
            }
            WEIGHTS => {
                let len = self.weights.len() as u32 * 4;
                self.weights = read_f32s(ctx.sram_read(0, len)?);
                ctx.consume(len as u64 / 4);
                Ok(())
            }
            c => Err(protocol(ctx.pe(), format!("unexpected interrupt {c}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ControlPhase {
    Collect,
    Gather,
    Broadcast,
    Done,
}

/// Collects gradients, sums them in copy order and applies Adam.
pub struct ControlProgram {
    /// `[copy][layer]` layer cores.
    cores: Vec<Vec<PeId>>,
    lens: Vec<usize>,
    phase: ControlPhase,
    ready: Vec<Vec<bool>>,
    outcomes: Vec<Outcome>,
    degenerate: usize,
    pending: usize,
    weights: Vec<f32>,
    grads: Vec<f32>,
    adam: Option<AdamState>,
}

impl ControlProgram {
    fn total(&self) -> usize {
        self.lens.iter().sum()
    }

    fn offset(&self, layer: usize) -> usize {
        self.lens[..layer].iter().sum()
    }

    fn buffer_addr(&self, copy: usize, layer: usize) -> u32 {
        ((copy * self.total() + self.offset(layer)) * 4) as u32
    }

    fn weights_addr(&self) -> u32 {
        (self.cores.len() * self.total() * 4) as u32
    }

    fn gather(&mut self, ctx: &mut PeContext<'_>) -> evfabric_core::Result<()> {
        self.phase = ControlPhase::Gather;
        self.pending = self.cores.len() * self.lens.len();
        for c in 0..self.cores.len() {
            for l in 0..self.lens.len() {
                let len = self.lens[l] as u64 * 4;
                let req = DmaRequest {
                    src: MemRef::sram(self.cores[c][l], len as u32),
                    dst: MemRef::sram(ctx.pe(), self.buffer_addr(c, l)),
                    len,
                };
                ctx.dma(req, 0)?;
            }
        }
        Ok(())
    }

    fn reduce(&mut self, ctx: &mut PeContext<'_>) -> evfabric_core::Result<()> {
        let total = self.total();
        self.grads = vec![0.0; total];
        for c in 0..self.cores.len() {
            let buf = read_f32s(ctx.sram_read(self.buffer_addr(c, 0), total as u32 * 4)?);
            for (g, b) in self.grads.iter_mut().zip(&buf) {
                *g += b;
            }
        }
        ctx.count("mac", (self.cores.len() * total) as u64);
        ctx.consume(CYCLES_PER_WEIGHT * (self.cores.len() * total) as u64);
        let Some(adam) = self.adam.as_mut() else {
            self.phase = ControlPhase::Done;
            return Ok(());
        };
        adam.apply(&mut self.weights, &self.grads);
        ctx.count("mac", 6 * total as u64);
        ctx.consume(6 * CYCLES_PER_WEIGHT * total as u64);
        let addr = self.weights_addr();
        ctx.sram_write(addr, &f32_bytes(&self.weights))?;
        self.phase = ControlPhase::Broadcast;
        self.pending = self.cores.len() * self.lens.len();
        for c in 0..self.cores.len() {
            for l in 0..self.lens.len() {
                let req = DmaRequest {
                    src: MemRef::sram(ctx.pe(), addr + self.offset(l) as u32 * 4),
                    dst: MemRef::sram(self.cores[c][l], 0),
                    len: self.lens[l] as u64 * 4,
                };
                ctx.dma(req, 0)?;
            }
        }
        Ok(())
    }
}

impl PeProgram for ControlProgram {
    fn sram_bytes(&self) -> u32 {
        let w = self.total();
        let adam = if self.adam.is_some() { 8 * w } else { 0 };
        ((self.cores.len() + 2) * 4 * w + adam) as u32 + 512
    }

    fn on_irq(&mut self, ctx: &mut PeContext<'_>, irq: &Irq) -> evfabric_core::Result<()> {
        if irq.code != GRAD_READY || self.phase != ControlPhase::Collect {
            return Err(protocol(ctx.pe(), format!("unexpected interrupt {} in {:?}", irq.code, self.phase)));
        }
        if irq.args.len() != 6 || irq.args[0] as usize >= self.ready.len() || irq.args[1] as usize >= self.lens.len() {
            return Err(protocol(ctx.pe(), format!("malformed gradient report {:?}", irq.args)));
        }
        let (c, l) = (irq.args[0] as usize, irq.args[1] as usize);
        if std::mem::replace(&mut self.ready[c][l], true) {
            return Err(protocol(ctx.pe(), format!("copy {c} layer {l} reported twice")));
        }
        if l + 1 == self.lens.len() {
            self.outcomes[c] = Outcome {
                loss: f64::from_bits(irq.args[2] as u64 | (irq.args[3] as u64) << 32),
                correct: irq.args[4] == 1,
            };
        }
        self.degenerate += irq.args[5] as usize;
        if self.ready.iter().flatten().all(|&r| r) {
            self.gather(ctx)?;
        }
        Ok(())
    }

    fn on_dma_done(&mut self, ctx: &mut PeContext<'_>, _tag: u64) -> evfabric_core::Result<()> {
        self.pending -= 1;
        if self.pending > 0 {
            return Ok(());
        }
        match self.phase {
            ControlPhase::Gather => self.reduce(ctx),
            ControlPhase::Broadcast => {
                for c in 0..self.cores.len() {
                    for l in 0..self.lens.len() {
                        ctx.raise_irq(self.cores[c][l], WEIGHTS, Vec::new())?;
                    }
                }
                self.phase = ControlPhase::Done;
                Ok(())
            }
            p => Err(protocol(ctx.pe(), format!("DMA completion in {p:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub batch: usize,
    /// Mean over the batch.
    pub loss: f64,
    pub correct: usize,
    /// Batch sum, flattened over layers.
    pub grads: Vec<f32>,
    pub degenerate: usize,
    /// Forward spike packets and backward error packets per layer boundary,
    /// inputs first, summed over copies.
    pub forward_packets: Vec<usize>,
    pub error_packets: Vec<usize>,
    pub cores: usize,
    pub end_time: u64,
    pub energy: EnergyReport,
}

struct Layout {
    inputs: Vec<PeId>,
    /// `[copy][layer]`.
    layers: Vec<Vec<PeId>>,
    control: Option<PeId>,
}

/// Builds and runs one machine holding `batch.len()` copies of `net`.
fn run(
    net: &FeedForwardSnn,
    batch: &[Sample],
    cfg: &EventpropConfig,
    reduce: bool,
    adam: Option<AdamState>,
) -> Result<(Machine, Layout)> {
    net.validate()?;
    cfg.validate()?;
    let outputs = *net.sizes.last().unwrap();
    if batch.is_empty() {
        return Err(EventpropError::InvalidInput("empty batch".into()));
    }
    if let Some(s) = batch.iter().find(|s| s.label >= outputs) {
        return Err(EventpropError::InvalidInput(format!("label {} with {outputs} outputs", s.label)));
    }
    let per_copy = net.layers() + 1;
    let cores = batch.len() * per_copy + reduce as usize;
    if cores > MachineConfig::default().cores_per_chip as usize || batch.len() >= 1 << 15 {
        return Err(EventpropError::InvalidConfig(format!("batch {} needs {cores} cores on one chip", batch.len())));
    }
    let mcfg = MachineConfig {
        cores_per_chip: cores as u16,
        ..MachineConfig::default()
    };
    let mut m = Machine::new(mcfg)?;
    let pe = |i: usize| PeId::new(0, 0, i as u16);
    let layout = Layout {
        inputs: (0..batch.len()).map(|c| pe(c * per_copy)).collect(),
        layers: (0..batch.len())
            .map(|c| (1..per_copy).map(|l| pe(c * per_copy + l)).collect())
            .collect(),
        control: reduce.then(|| pe(cores - 1)),
    };
    let mut table = RoutingTable::new();
    for c in 0..batch.len() {
        for l in 0..net.layers() {
            let dest = layout.layers[c][l].core;
            table.push(RoutingEntry::new(key_base(c, l), KEY_MASK, LinkSet::empty(), [dest])?)?;
        }
    }
    m.set_table(CHIP, table)?;
    for (c, sample) in batch.iter().enumerate() {
        let spikes = input_spikes(net, &sample.spikes)?;
        m.load(
            layout.inputs[c],
            Box::new(InputProgram {
                spikes,
                next: 0,
                key: key_base(c, 0),
                horizon: net.horizon,
                dt: cfg.dt,
                errors: Vec::new(),
                expected: None,
            }),
        )?;
        for l in 0..net.layers() {
            let last = l + 1 == net.layers();
            let lower = if l == 0 { layout.inputs[c] } else { layout.layers[c][l - 1] };
            let prog = LayerProgram {
                copy: c,
                layer: l,
                sim: LayerSim::new(net.lif[l], net.sizes[l], net.sizes[l + 1]),
                weights: net.weights[l].clone(),
                neurons: net.sizes[l + 1],
                horizon: net.horizon,
                dt: cfg.dt,
                out_key: (!last).then(|| key_base(c, l + 1)),
                in_key: key_base(c, l),
                lower,
                control: layout.control,
                label: last.then_some(sample.label),
                tau_scale: cfg.tau_scale(net),
                t_max: cfg.t_max(net),
                eps_rate: cfg.eps_rate,
                incoming: Vec::new(),
                own: Vec::new(),
                g: Vec::new(),
                received: 0,
                expected: None,
                forward_done: false,
                backward_done: false,
                grad: vec![0.0; net.weights[l].len()],
                degenerate: 0,
                outcome: Outcome::default(),
            };
            m.load(layout.layers[c][l], Box::new(prog))?;
            m.sram_write(layout.layers[c][l], 0, &f32_bytes(&net.weights[l]))?;
        }
    }
    if let Some(control) = layout.control {
        let lens: Vec<usize> = net.weights.iter().map(Vec::len).collect();
        m.load(
            control,
            Box::new(ControlProgram {
                cores: layout.layers.clone(),
                ready: vec![vec![false; lens.len()]; batch.len()],
                lens,
                phase: ControlPhase::Collect,
                outcomes: vec![Outcome::default(); batch.len()],
                degenerate: 0,
                pending: 0,
                weights: net.weights.concat(),
                grads: Vec::new(),
                adam,
            }),
        )?;
    }
    m.boot()?;
    m.run_until_idle()?;
    Ok((m, layout))
}

fn stalled(what: &str) -> EventpropError {
    EventpropError::Protocol(format!("fabric run stalled: {what}"))
}

fn report(net: &FeedForwardSnn, batch: &[Sample], m: &Machine, layout: &Layout, model: &CostModel) -> Result<StepReport> {
    let layers = net.layers();
    let mut forward_packets = vec![0; layers];
    let mut error_packets = vec![0; layers];
    for c in 0..batch.len() {
        let input = m.program::<InputProgram>(layout.inputs[c]).expect("input core is loaded");
        if input.expected != Some(input.errors.len()) {
            return Err(stalled(&format!("copy {c} input core")));
        }
        error_packets[0] += input.errors.len();
        for l in 0..layers {
            let p = m.program::<LayerProgram>(layout.layers[c][l]).expect("layer core is loaded");
            if !p.backward_done {
                return Err(stalled(&format!("copy {c} layer {l}")));
            }
            forward_packets[l] += p.incoming.len();
            if l + 1 < layers {
                error_packets[l + 1] += p.received;
            }
        }
    }
    let control = layout
        .control
        .map(|pe| m.program::<ControlProgram>(pe).expect("control core is loaded"));
    let (loss, correct, grads, degenerate) = match control {
        Some(ctl) => {
            if ctl.phase != ControlPhase::Done {
                return Err(stalled(&format!("control core in {:?}", ctl.phase)));
            }
            let loss: f64 = ctl.outcomes.iter().map(|o| o.loss).sum();
            let correct = ctl.outcomes.iter().filter(|o| o.correct).count();
            (loss, correct, ctl.grads.clone(), ctl.degenerate)
        }
        None => {
            let mut loss = 0.0;
            let mut correct = 0;
            let mut degenerate = 0;
            for c in 0..batch.len() {
                for l in 0..layers {
                    let p = m.program::<LayerProgram>(layout.layers[c][l]).unwrap();
                    degenerate += p.degenerate;
                    if l + 1 == layers {
                        loss += p.outcome.loss;
                        correct += p.outcome.correct as usize;
                    }
                }
            }
            (loss, correct, Vec::new(), degenerate)
        }
    };
    let energy = account(&m.activity(), model)?;
    Ok(StepReport {
        batch: batch.len(),
        loss: loss / batch.len() as f64,
        correct,
        grads,
        degenerate,
        forward_packets,
        error_packets,
        cores: m.loaded_pes().len(),
        end_time: m.end_time(),
        energy,
    })
}

/// Summed batch gradients computed on the fabric, weights unchanged.
pub fn gradients_on_fabric(
    net: &FeedForwardSnn,
    batch: &[Sample],
    cfg: &EventpropConfig,
    model: &CostModel,
) -> Result<StepReport> {
    let (m, layout) = run(net, batch, cfg, true, None)?;
    report(net, batch, &m, &layout, model)
}

/// One training step: gradients on every copy, reduction and Adam on the
/// control core, new weights broadcast back. Updates `net` and `adam` from
/// what the fabric ends up holding.
pub fn train_step(
    net: &mut FeedForwardSnn,
    adam: &mut AdamState,
    batch: &[Sample],
    cfg: &EventpropConfig,
    model: &CostModel,
) -> Result<StepReport> {
    if adam.m.len() != net.weight_count() {
        return Err(EventpropError::InvalidConfig(format!(
            "optimiser holds {} weights, network has {}",
            adam.m.len(),
            net.weight_count()
        )));
    }
    let (m, layout) = run(net, batch, cfg, true, Some(adam.clone()))?;
    let step = report(net, batch, &m, &layout, model)?;
    let ctl = m
        .program::<ControlProgram>(layout.control.unwrap())
        .expect("control core is loaded");
    let updated = unflatten(net, &ctl.weights);
    for (c, copy) in layout.layers.iter().enumerate() {
        for (l, &pe) in copy.iter().enumerate() {
            if m.program::<LayerProgram>(pe).unwrap().weights() != updated[l] {
                return Err(EventpropError::Protocol(format!("copy {c} layer {l} missed the weight broadcast")));
            }
        }
    }
    net.weights = updated;
    *adam = ctl.adam.clone().expect("control core holds the optimiser");
    Ok(step)
}

/// Spike records of every copy, read back from the cores.
pub fn records_on_fabric(net: &FeedForwardSnn, batch: &[Sample], cfg: &EventpropConfig) -> Result<Vec<SpikeRecord>> {
    let (m, layout) = run(net, batch, cfg, false, None)?;
    Ok((0..batch.len())
        .map(|c| {
            let input = m.program::<InputProgram>(layout.inputs[c]).unwrap();
            let mut layers = vec![input.spikes.clone()];
            layers.extend(
                layout.layers[c]
                    .iter()
                    .map(|&pe| m.program::<LayerProgram>(pe).unwrap().spikes().to_vec()),
            );
            SpikeRecord { layers }
        })
        .collect())
}

/// Gradient computation over a fixed sample set in rounds of `batch`
/// copies, without the reduction core, for energy sweeps.
#[derive(Clone, Debug)]
pub struct GradientWorkload {
    pub net: FeedForwardSnn,
    pub samples: Vec<Sample>,
    pub cfg: EventpropConfig,
}

impl BatchWorkload for GradientWorkload {
    fn run(&self, batch: usize, model: &CostModel) -> Result<SweepRun, EnergyError> {
        let fail = |e: EventpropError| EnergyError::Workload(e.to_string());
        let mut energy = 0;
        for chunk in self.samples.chunks(batch.max(1)) {
            let (m, layout) = run(&self.net, chunk, &self.cfg, false, None).map_err(fail)?;
            energy += report(&self.net, chunk, &m, &layout, model).map_err(fail)?.energy.total();
        }
        Ok(SweepRun {
            items: self.samples.len(),
            timesteps_per_item: self.net.horizon as u64,
            energy,
        })
    }
}
