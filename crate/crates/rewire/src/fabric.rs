//! Training split across fabric cores: one coordinator and one core per
//! layer. Samples stream from DRAM into the first layer by DMA; activations
//! travel forward and errors backward as DMAs between neighbouring layer
//! cores, each followed by an interrupt. After every minibatch the
//! coordinator tells each layer core to apply its update, drawing noise and
//! regrowth from that layer's own stream.

use evfabric_core::{
    account, CostModel, DmaRequest, EnergyReport, FabricError, Irq, Machine, MachineConfig, MemRef,
    PeContext, PeId, PeProgram,
};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connectome::{SparseConnectome, SparseLayer};
use crate::data::Dataset;
use crate::error::{Result, RewireError};
use crate::kernels::{argmax, layer_backward, layer_forward, relu, relu_mask, softmax_delta};
use crate::rewire::{prune_and_regrow, update_layer, RewireHyper};
use crate::train::{epoch_order, init_model, EpochMetrics, TrainConfig, TrainReport};

const FORWARD: u32 = 1;
const BACKWARD: u32 = 2;
const SAMPLE_DONE: u32 = 3;
const PREDICTED: u32 = 4;
const UPDATE: u32 = 5;
const UPDATED: u32 = 6;
const TRAIN: u32 = 0;
const EVAL: u32 = 1;
const DRAM_CHIP: evfabric_core::ChipCoord = evfabric_core::ChipCoord::new(0, 0);

fn read_f32s(bytes: &[u8], out: &mut [f32]) {
    for (o, c) in out.iter_mut().zip(bytes.chunks_exact(4)) {
        *o = f32::from_le_bytes(c.try_into().unwrap());
    }
}

fn to_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

/// One layer on its own core. SRAM holds the incoming activation and the
/// outgoing error (`inputs` each), then the incoming error and outgoing
/// activation (`outputs` each).
pub struct LayerProgram {
    index: usize,
    last: bool,
    layer: SparseLayer,
    k: usize,
    rng: ChaCha8Rng,
    hyper: RewireHyper,
    footprint: u32,
    coordinator: PeId,
    prev: Option<PeId>,
    next: Option<PeId>,
    prev_inputs: u32,
    x: Vec<f32>,
    z: Vec<f32>,
    delta: Vec<f32>,
    grad_w: Vec<f32>,
    grad_b: Vec<f32>,
    /// Interrupt to raise once the outgoing DMA lands.
    after_dma: Option<(PeId, u32, Vec<u32>)>,
}

impl LayerProgram {
    fn in_act(&self) -> u32 {
        0
    }

    fn out_err(&self) -> u32 {
        self.layer.inputs as u32 * 4
    }

    fn in_err(&self) -> u32 {
        self.layer.inputs as u32 * 8
    }

    fn out_act(&self) -> u32 {
        self.in_err() + self.layer.outputs as u32 * 4
    }

    pub fn layer(&self) -> &SparseLayer {
        &self.layer
    }

    fn send(
        &mut self,
        ctx: &mut PeContext<'_>,
        src: u32,
        dst: PeId,
        dst_addr: u32,
        data: &[f32],
        irq: (PeId, u32, Vec<u32>),
    ) -> evfabric_core::Result<()> {
        ctx.sram_write(src, &to_bytes(data))?;
        ctx.dma(
            DmaRequest {
                src: MemRef::sram(ctx.pe(), src),
                dst: MemRef::sram(dst, dst_addr),
                len: data.len() as u64 * 4,
            },
            0,
        )?;
        self.after_dma = Some(irq);
        Ok(())
    }

    fn forward(&mut self, ctx: &mut PeContext<'_>, args: &[u32]) -> evfabric_core::Result<()> {
        let bytes = ctx.sram_read(self.in_act(), self.layer.inputs as u32 * 4)?.to_vec();
        read_f32s(&bytes, &mut self.x);
        layer_forward(&self.layer, &self.x, &mut self.z);
        let k = self.layer.k() as u64;
        ctx.count("mac", k);
        ctx.consume(k + self.layer.outputs as u64);
        let (mode, label, scale) = (args[1], args[2] as usize, f32::from_bits(args[3]));
        if !self.last {
            let mut a = vec![0.0; self.layer.outputs];
            relu(&self.z, &mut a);
            let next = self.next.expect("hidden layer has a successor");
            let src = self.out_act();
            return self.send(ctx, src, next, 0, &a, (next, FORWARD, args.to_vec()));
        }
        if mode == EVAL {
            let pred = argmax(&self.z) as u32;
            ctx.raise_irq(self.coordinator, PREDICTED, vec![args[0], pred])?;
            return Ok(());
        }
        let correct = (argmax(&self.z) == label) as u32;
        let loss = softmax_delta(&self.z, label, scale, &mut self.delta);
        self.backward(ctx, vec![args[0], correct, loss.to_bits()])
    }

    fn backward(&mut self, ctx: &mut PeContext<'_>, report: Vec<u32>) -> evfabric_core::Result<()> {
        let k = self.layer.k() as u64;
        ctx.count("mac", 2 * k);
        ctx.consume(2 * k + self.layer.outputs as u64);
        match self.prev {
            Some(prev) => {
                let mut din = vec![0.0; self.layer.inputs];
                layer_backward(&self.layer, &self.x, &self.delta, &mut self.grad_w, &mut self.grad_b, Some(&mut din));
                let (src, dst) = (self.out_err(), self.prev_inputs * 8);
                self.send(ctx, src, prev, dst, &din, (prev, BACKWARD, report))
            }
            None => {
                layer_backward(&self.layer, &self.x, &self.delta, &mut self.grad_w, &mut self.grad_b, None);
                ctx.raise_irq(self.coordinator, SAMPLE_DONE, report)?;
                Ok(())
            }
        }
    }
}

impl PeProgram for LayerProgram {
    fn sram_bytes(&self) -> u32 {
        self.footprint
    }

    fn on_irq(&mut self, ctx: &mut PeContext<'_>, irq: &Irq) -> evfabric_core::Result<()> {
        match irq.code {
            FORWARD => self.forward(ctx, &irq.args),
            BACKWARD => {
                let bytes = ctx.sram_read(self.in_err(), self.layer.outputs as u32 * 4)?.to_vec();
                read_f32s(&bytes, &mut self.delta);
                relu_mask(&self.z, &mut self.delta);
                self.backward(ctx, irq.args.clone())
            }
            UPDATE => {
                let rewire = irq.args[0] == 1;
                update_layer(&mut self.layer, &self.grad_w, &self.grad_b, &self.hyper, &mut self.rng);
                let mut pruned = 0;
                if rewire {
                    pruned = prune_and_regrow(&mut self.layer, self.index, self.hyper.theta0, &mut self.rng)
                        .map_err(|e| FabricError::program(ctx.pe(), e.to_string()))?
                        .pruned;
                }
                self.layer
                    .check(self.k, rewire)
                    .map_err(|e| FabricError::program(ctx.pe(), e.to_string()))?;
                self.grad_w.fill(0.0);
                self.grad_b.fill(0.0);
                ctx.consume(3 * self.layer.k() as u64);
                ctx.raise_irq(self.coordinator, UPDATED, vec![pruned as u32])?;
                Ok(())
            }
            c => Err(FabricError::program(ctx.pe(), format!("unexpected interrupt {c}"))),
        }
    }

    fn on_dma_done(&mut self, ctx: &mut PeContext<'_>, _tag: u64) -> evfabric_core::Result<()> {
        let (to, code, args) = self
            .after_dma
            .take()
            .ok_or_else(|| FabricError::program(ctx.pe(), "unexpected dma completion"))?;
        ctx.raise_irq(to, code, args)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Train,
    Update,
    Eval,
    Finished,
}

#[derive(Clone, Debug, Default)]
struct EpochTally {
    loss: f64,
    hits: usize,
    test_hits: usize,
    pruned: usize,
    period: usize,
}

/// Walks the same schedule as the standalone trainer: per epoch, a shuffled
/// pass over the training set in minibatches, then an evaluation pass.
pub struct CoordinatorProgram {
    layers: Vec<PeId>,
    train_labels: Vec<u8>,
    test_labels: Vec<u8>,
    dim: usize,
    batch_size: usize,
    epochs: usize,
    hyper: RewireHyper,
    order_rng: ChaCha8Rng,
    phase: Phase,
    epoch: usize,
    order: Vec<usize>,
    pos: usize,
    batch_end: usize,
    step: usize,
    updates_pending: usize,
    pending_forward: Option<Vec<u32>>,
    tallies: Vec<EpochTally>,
}

impl CoordinatorProgram {
    fn test_base(&self) -> u64 {
        (self.train_labels.len() * self.dim * 4) as u64
    }

    fn start_epoch(&mut self) {
        let steps = self.train_labels.len().div_ceil(self.batch_size);
        self.order = epoch_order(self.train_labels.len(), &mut self.order_rng);
        self.tallies.push(EpochTally {
            period: self.hyper.period(self.epoch, steps),
            ..EpochTally::default()
        });
        self.pos = 0;
        self.step = 0;
        self.start_batch();
    }

    fn start_batch(&mut self) {
        self.phase = Phase::Train;
        self.batch_end = (self.pos + self.batch_size).min(self.order.len());
    }

    /// DMAs a sample into the first layer's input buffer; the forward
    /// interrupt follows on completion.
    fn feed(&mut self, ctx: &mut PeContext<'_>, addr: u64, args: Vec<u32>) -> evfabric_core::Result<()> {
        ctx.dma(
            DmaRequest {
                src: MemRef::dram(DRAM_CHIP, addr),
                dst: MemRef::sram(self.layers[0], 0),
                len: self.dim as u64 * 4,
            },
            0,
        )?;
        self.pending_forward = Some(args);
        Ok(())
    }

    /// Issues whatever comes next in the schedule.
    fn next(&mut self, ctx: &mut PeContext<'_>) -> evfabric_core::Result<()> {
        ctx.consume(20);
        match self.phase {
            Phase::Train => {
                let i = self.order[self.pos];
                let len = self.batch_end - self.batch_size * self.step;
                let scale = 1.0 / len as f32;
                let args = vec![i as u32, TRAIN, self.train_labels[i] as u32, scale.to_bits()];
                self.feed(ctx, (i * self.dim * 4) as u64, args)
            }
            Phase::Eval if self.pos < self.test_labels.len() => {
                let i = self.pos;
                let addr = self.test_base() + (i * self.dim * 4) as u64;
                self.feed(ctx, addr, vec![i as u32, EVAL, 0, 0])
            }
            Phase::Eval => {
                self.epoch += 1;
                if self.epoch == self.epochs {
                    self.phase = Phase::Finished;
                    return Ok(());
                }
                self.start_epoch();
                self.next(ctx)
            }
            Phase::Update | Phase::Finished => Ok(()),
        }
    }
}

impl PeProgram for CoordinatorProgram {
    fn sram_bytes(&self) -> u32 {
        1024 + (self.train_labels.len() + self.test_labels.len()) as u32
    }

    fn on_dma_done(&mut self, ctx: &mut PeContext<'_>, _tag: u64) -> evfabric_core::Result<()> {
        let args = self
            .pending_forward
            .take()
            .ok_or_else(|| FabricError::program(ctx.pe(), "unexpected dma completion"))?;
        ctx.raise_irq(self.layers[0], FORWARD, args)?;
        Ok(())
    }

    fn on_irq(&mut self, ctx: &mut PeContext<'_>, irq: &Irq) -> evfabric_core::Result<()> {
        match (irq.code, self.phase) {
            (_, _) if irq.source.is_none() => {
                if self.epochs == 0 {
                    self.phase = Phase::Finished;
                    return Ok(());
                }
                self.start_epoch();
                self.next(ctx)
            }
            (SAMPLE_DONE, Phase::Train) => {
                let t = self.tallies.last_mut().expect("epoch started");
                t.hits += irq.args[1] as usize;
                t.loss += f32::from_bits(irq.args[2]) as f64;
                self.pos += 1;
                if self.pos < self.batch_end {
                    return self.next(ctx);
                }
                self.phase = Phase::Update;
                self.updates_pending = self.layers.len();
                let rewire = (self.step + 1) % t.period == 0;
                for &l in &self.layers.clone() {
                    ctx.raise_irq(l, UPDATE, vec![rewire as u32])?;
                }
                Ok(())
            }
            (UPDATED, Phase::Update) => {
                self.tallies.last_mut().expect("epoch started").pruned += irq.args[0] as usize;
                self.updates_pending -= 1;
                if self.updates_pending > 0 {
                    return Ok(());
                }
                self.step += 1;
                if self.pos == self.order.len() {
                    self.phase = Phase::Eval;
                    self.pos = 0;
                } else {
                    self.start_batch();
                }
                self.next(ctx)
            }
            (PREDICTED, Phase::Eval) => {
                let (i, pred) = (irq.args[0] as usize, irq.args[1]);
                let t = self.tallies.last_mut().expect("epoch started");
                t.test_hits += (pred == self.test_labels[i] as u32) as usize;
                self.pos += 1;
                self.next(ctx)
            }
            (code, phase) => Err(FabricError::program(
                ctx.pe(),
                format!("interrupt {code} during {phase:?}"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeFootprint {
    pub pe: PeId,
    pub role: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FabricTrainReport {
    pub train: TrainReport,
    pub footprints: Vec<PeFootprint>,
    pub cap: u64,
    pub end_time: u64,
    pub energy: EnergyReport,
}

/// Trains on `cores_per_chip >= layers + 1` cores of chip (0, 0) with every
/// core's SRAM capped at the memory budget. Returns the trained connectome
/// read back from the layer cores.
pub fn train_on_fabric(
    train_set: &Dataset,
    test_set: &Dataset,
    cfg: &TrainConfig,
    model: &CostModel,
) -> Result<(SparseConnectome, FabricTrainReport)> {
    let (net, order_rng, rngs) = init_model(cfg)?;
    if train_set.dim != cfg.arch[0] || test_set.dim != cfg.arch[0] {
        return Err(RewireError::ShapeMismatch(format!(
            "datasets have {}/{} features, architecture expects {}",
            train_set.dim, test_set.dim, cfg.arch[0]
        )));
    }
    if train_set.is_empty() {
        return Err(RewireError::Dataset("empty training set".into()));
    }
    let n_layers = net.layers.len();
    let mcfg = MachineConfig {
        cores_per_chip: n_layers as u16 + 1,
        sram_bytes: cfg.memory.cap as u32,
        ..MachineConfig::default()
    };
    let mut machine = Machine::new(mcfg)?;
    let coordinator = PeId::new(0, 0, 0);
    let layer_pes: Vec<PeId> = (1..=n_layers as u16).map(|c| PeId::new(0, 0, c)).collect();
    machine.dram_write(DRAM_CHIP, 0, &to_bytes(&train_set.features))?;
    machine.dram_write(DRAM_CHIP, (train_set.features.len() * 4) as u64, &to_bytes(&test_set.features))?;

    let mut footprints = vec![];
    for (l, (layer, rng)) in net.layers.iter().zip(rngs).enumerate() {
        let bytes = cfg.memory.layer(layer);
        footprints.push(PeFootprint {
            pe: layer_pes[l],
            role: format!("layer {l}"),
            bytes,
        });
        if bytes > cfg.memory.cap {
            return Err(RewireError::BudgetExceeded {
                scope: format!("layer {l} core"),
                bytes,
                cap: cfg.memory.cap,
            });
        }
        let prog = LayerProgram {
            index: l,
            last: l + 1 == n_layers,
            k: layer.k(),
            rng,
            hyper: cfg.hyper.clone(),
            footprint: bytes as u32,
            coordinator,
            prev: l.checked_sub(1).map(|p| layer_pes[p]),
            next: layer_pes.get(l + 1).copied(),
            prev_inputs: l.checked_sub(1).map_or(0, |p| net.layers[p].inputs as u32),
            x: vec![0.0; layer.inputs],
            z: vec![0.0; layer.outputs],
            delta: vec![0.0; layer.outputs],
            grad_w: vec![0.0; layer.k()],
            grad_b: vec![0.0; layer.outputs],
            after_dma: None,
            layer: layer.clone(),
        };
        machine.load(layer_pes[l], Box::new(prog))?;
    }
    let coord = CoordinatorProgram {
        layers: layer_pes.clone(),
        train_labels: train_set.labels.clone(),
        test_labels: test_set.labels.clone(),
        dim: train_set.dim,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        hyper: cfg.hyper.clone(),
        order_rng,
        phase: Phase::Finished,
        epoch: 0,
        order: Vec::new(),
        pos: 0,
        batch_end: 0,
        step: 0,
        updates_pending: 0,
        pending_forward: None,
        tallies: Vec::new(),
    };
    footprints.insert(
        0,
        PeFootprint {
            pe: coordinator,
            role: "coordinator".into(),
            bytes: coord.sram_bytes() as u64,
        },
    );
    machine.load(coordinator, Box::new(coord))?;
    machine.boot()?;
    machine.post_irq(coordinator, 0, Vec::new(), 0)?;
    machine.run_until_idle()?;

    let coord = machine
        .program::<CoordinatorProgram>(coordinator)
        .expect("coordinator is loaded");
    if coord.phase != Phase::Finished {
        return Err(RewireError::Invariant(format!(
            "fabric run stalled in {:?} at epoch {}",
            coord.phase, coord.epoch
        )));
    }
    let tallies = coord.tallies.clone();
    let layers: Vec<SparseLayer> = layer_pes
        .iter()
        .map(|&pe| {
            machine
                .program::<LayerProgram>(pe)
                .expect("layer core is loaded")
                .layer()
                .clone()
        })
        .collect();
    let trained = SparseConnectome {
        layers,
        budget: net.budget.clone(),
    };
    let steps = train_set.len().div_ceil(cfg.batch_size);
    let epochs: Vec<EpochMetrics> = tallies
        .iter()
        .enumerate()
        .map(|(e, t)| EpochMetrics {
            epoch: e,
            rewire_period: t.period,
            steps,
            train_loss: t.loss / train_set.len() as f64,
            train_accuracy: t.hits as f64 / train_set.len() as f64,
            test_accuracy: if test_set.is_empty() {
                0.0
            } else {
                t.test_hits as f64 / test_set.len() as f64
            },
            active: trained.layers.iter().map(SparseLayer::k).collect(),
            connectivity: trained.connectivity(),
            footprint_per_layer: cfg.memory.per_layer(&trained),
            footprint_model: cfg.memory.model(&trained),
            pruned: t.pruned,
            regrown: t.pruned,
        })
        .collect();
    let activity = machine.activity();
    let report = FabricTrainReport {
        train: TrainReport {
            arch: cfg.arch.clone(),
            budget: net.budget.clone(),
            final_test_accuracy: epochs.last().map_or(0.0, |e| e.test_accuracy),
            epochs,
        },
        footprints,
        cap: cfg.memory.cap,
        end_time: activity.duration,
        energy: account(&activity, model)?,
    };
    Ok((trained, report))
}
