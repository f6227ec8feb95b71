//! Scheduler and worker PE programs and the host side of a run.
//!
//! The host tiles A and B (zero-padded) into DRAM of chip (0, 0), loads the
//! scheduler on the first PE and the workers on the next ones, and raises a
//! start interrupt. Workers move tiles and partial results only by DMA and
//! report progress only by DMA-writing their flag into the scheduler's SRAM;
//! the scheduler polls those flags on a timer and answers with interrupts.

use std::collections::{BTreeMap, VecDeque};

use evfabric_core::{
    account, CommLog, CostModel, Cycles, DmaRequest, EnergyReport, FabricError, Irq, Machine,
    MachineConfig, MemRef, PeContext, PeId, PeProgram, TraceRecord,
};
use serde::{Deserialize, Serialize};

use crate::error::{MatmulError, Result};
use crate::fsm::{Command, SchedulerFsm, WorkerFlag, WorkerState, FLAG_BYTES, IRQ_START};
use crate::matrix::Matrix;
use crate::plan::TilingPlan;

/// Multiply-accumulate lanes of a worker's matrix unit.
pub const MACS_PER_CYCLE: u64 = 16;
/// Partial-sum lanes used when adding a fetched partial result.
pub const ADDS_PER_CYCLE: u64 = 4;
const POLL_BASE_CYCLES: u64 = 10;
const POLL_CYCLES_PER_FLAG: u64 = 1;
const COMMAND_CYCLES: u64 = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatmulOptions {
    /// Reference cycles between the end of one flag poll and the start of
    /// the next.
    pub poll_period: Cycles,
    pub trace: bool,
}

impl Default for MatmulOptions {
    fn default() -> Self {
        Self {
            poll_period: 150,
            trace: false,
        }
    }
}

/// DRAM placement of the tiled operands on chip (0, 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct DramLayout {
    tile_m: usize,
    tile_k: usize,
    tile_n: usize,
    tiles_k: usize,
    tiles_n: usize,
    b_base: u64,
    c_base: u64,
}

impl DramLayout {
    fn new(plan: &TilingPlan) -> Self {
        let (ti, tk, tj) = plan.tile_counts();
        let b_base = (ti * tk * plan.a_tile_bytes()) as u64;
        Self {
            tile_m: plan.tile_m,
            tile_k: plan.tile_k,
            tile_n: plan.tile_n,
            tiles_k: tk,
            tiles_n: tj,
            b_base,
            c_base: b_base + (tk * tj * plan.b_tile_bytes()) as u64,
        }
    }

    fn a_tile(&self, i: usize, k: usize) -> MemRef {
        let idx = i * self.tiles_k + k;
        MemRef::dram(DRAM_CHIP, (idx * self.tile_m * self.tile_k) as u64)
    }

    fn b_tile(&self, k: usize, j: usize) -> MemRef {
        let idx = k * self.tiles_n + j;
        MemRef::dram(DRAM_CHIP, self.b_base + (idx * self.tile_k * self.tile_n) as u64)
    }

    fn c_tile(&self, i: usize, j: usize) -> MemRef {
        let idx = i * self.tiles_n + j;
        MemRef::dram(DRAM_CHIP, self.c_base + (idx * self.tile_m * self.tile_n * 4) as u64)
    }
}

const DRAM_CHIP: evfabric_core::ChipCoord = evfabric_core::ChipCoord::new(0, 0);

/// Worker SRAM: A tile, B tile, fetched partial, flag staging, then the
/// partial-result slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkerLayout {
    pub b_tile: u32,
    pub fetched: u32,
    pub flag: u32,
    pub slots: u32,
    pub slot_bytes: u32,
    pub slot_count: u32,
}

impl WorkerLayout {
    pub fn new(plan: &TilingPlan) -> Self {
        let b_tile = plan.a_tile_bytes() as u32;
        let fetched = (b_tile + plan.b_tile_bytes() as u32).next_multiple_of(8);
        let slot_bytes = plan.c_tile_bytes() as u32;
        let flag = fetched + slot_bytes;
        Self {
            b_tile,
            fetched,
            flag,
            slots: flag + FLAG_BYTES,
            slot_bytes,
            slot_count: plan.slots_per_worker() as u32,
        }
    }

    pub fn slot(&self, s: usize) -> u32 {
        self.slots + s as u32 * self.slot_bytes
    }

    pub fn total(&self) -> u32 {
        self.slot(self.slot_count as usize)
    }
}

#[derive(Clone, Copy, Debug)]
enum Compute {
    Multiply { slot: usize },
    Add { slot: usize },
    Free,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Dma(DmaRequest),
    Flag(WorkerState),
    Compute(Compute),
}

/// Executes commands one at a time, each as a fixed sequence of operations
/// that waits on every DMA (including its own flag writes).
pub struct WorkerProgram {
    plan: TilingPlan,
    dram: DramLayout,
    layout: WorkerLayout,
    scheduler: PeId,
    workers: Vec<PeId>,
    queue: VecDeque<Command>,
    ops: VecDeque<Op>,
    task: usize,
    waiting: bool,
    slot_of: BTreeMap<usize, usize>,
    epochs: BTreeMap<usize, u32>,
}

impl WorkerProgram {
    fn new(plan: &TilingPlan, scheduler: PeId, workers: Vec<PeId>) -> Self {
        Self {
            plan: plan.clone(),
            dram: DramLayout::new(plan),
            layout: WorkerLayout::new(plan),
            scheduler,
            workers,
            queue: VecDeque::new(),
            ops: VecDeque::new(),
            task: 0,
            waiting: false,
            slot_of: BTreeMap::new(),
            epochs: BTreeMap::new(),
        }
    }

    fn ops_for(&mut self, ctx: &PeContext<'_>, cmd: Command) -> evfabric_core::Result<Vec<Op>> {
        let me = ctx.pe();
        let slot = |t: usize| {
            self.slot_of
                .get(&t)
                .copied()
                .ok_or_else(|| FabricError::program(me, format!("task {t} holds no slot")))
        };
        let p = &self.plan;
        Ok(match cmd {
            Command::Load { task, slot } => {
                self.slot_of.insert(task, slot);
                let t = p.tasks[task];
                vec![
                    Op::Dma(DmaRequest {
                        src: self.dram.a_tile(t.i, t.k),
                        dst: MemRef::sram(me, 0),
                        len: p.a_tile_bytes() as u64,
                    }),
                    Op::Dma(DmaRequest {
                        src: self.dram.b_tile(t.k, t.j),
                        dst: MemRef::sram(me, self.layout.b_tile),
                        len: p.b_tile_bytes() as u64,
                    }),
                    Op::Flag(WorkerState::Loaded),
                ]
            }
            Command::Multiply { task } => vec![
                Op::Flag(WorkerState::Multiplying),
                Op::Compute(Compute::Multiply { slot: slot(task)? }),
                Op::Flag(WorkerState::MultDone),
            ],
            Command::Accumulate {
                task,
                partner_worker,
                partner_slot,
                ..
            } => {
                let src = *self.workers.get(partner_worker).ok_or_else(|| {
                    FabricError::program(me, format!("no worker {partner_worker}"))
                })?;
                vec![
                    Op::Flag(WorkerState::Accumulating),
                    Op::Dma(DmaRequest {
                        src: MemRef::sram(src, self.layout.slot(partner_slot)),
                        dst: MemRef::sram(me, self.layout.fetched),
                        len: self.layout.slot_bytes as u64,
                    }),
                    Op::Compute(Compute::Add { slot: slot(task)? }),
                    Op::Flag(WorkerState::MultDone),
                ]
            }
            Command::Writeback { task } => {
                let t = p.tasks[task];
                vec![
                    Op::Dma(DmaRequest {
                        src: MemRef::sram(me, self.layout.slot(slot(task)?)),
                        dst: self.dram.c_tile(t.i, t.j),
                        len: self.layout.slot_bytes as u64,
                    }),
                    Op::Flag(WorkerState::Done),
                ]
            }
            Command::Terminate { .. } => vec![
                Op::Compute(Compute::Free),
                Op::Flag(WorkerState::Terminated),
            ],
        })
    }

    /// Runs operations until one has to wait for a DMA or the queue empties.
    fn pump(&mut self, ctx: &mut PeContext<'_>) -> evfabric_core::Result<()> {
        while !self.waiting {
            let Some(op) = self.ops.pop_front() else {
                let Some(cmd) = self.queue.pop_front() else {
                    return Ok(());
                };
                self.task = cmd.task();
                let ops = self.ops_for(ctx, cmd)?;
                self.ops.extend(ops);
                continue;
            };
            match op {
                Op::Dma(req) => {
                    ctx.dma(req, self.task as u64)?;
                    self.waiting = true;
                }
                Op::Flag(state) => {
                    let epoch = self.epochs.entry(self.task).or_insert(0);
                    *epoch += 1;
                    let bytes = WorkerFlag::encode(state, *epoch);
                    ctx.sram_write(self.layout.flag, &bytes)?;
                    ctx.dma(
                        DmaRequest {
                            src: MemRef::sram(ctx.pe(), self.layout.flag),
                            dst: MemRef::sram(self.scheduler, self.task as u32 * FLAG_BYTES),
                            len: FLAG_BYTES as u64,
                        },
                        self.task as u64,
                    )?;
                    self.waiting = true;
                }
                Op::Compute(c) => self.compute(ctx, c)?,
            }
        }
        Ok(())
    }

    fn compute(&mut self, ctx: &mut PeContext<'_>, c: Compute) -> evfabric_core::Result<()> {
        let (tm, tk, tn) = (self.plan.tile_m, self.plan.tile_k, self.plan.tile_n);
        let l = self.layout;
        match c {
            Compute::Multiply { slot } => {
                let sram = ctx.sram();
                let a = &sram[..tm * tk];
                let b = &sram[l.b_tile as usize..l.b_tile as usize + tk * tn];
                let mut out = Vec::with_capacity(tm * tn * 4);
                for r in 0..tm {
                    for col in 0..tn {
                        let acc: i32 = (0..tk)
                            .map(|p| a[r * tk + p] as i8 as i32 * b[p * tn + col] as i8 as i32)
                            .sum();
                        out.extend_from_slice(&acc.to_le_bytes());
                    }
                }
                ctx.sram_write(l.slot(slot), &out)?;
                let macs = (tm * tk * tn) as u64;
                ctx.count("mac", macs);
                ctx.consume(macs.div_ceil(MACS_PER_CYCLE));
            }
            Compute::Add { slot } => {
                let base = l.slot(slot) as usize;
                let fetched = l.fetched as usize;
                let sram = ctx.sram_mut();
                for e in 0..tm * tn {
                    let word = |at: usize| i32::from_le_bytes(sram[at..at + 4].try_into().unwrap());
                    let sum = word(base + 4 * e) + word(fetched + 4 * e);
                    sram[base + 4 * e..base + 4 * e + 4].copy_from_slice(&sum.to_le_bytes());
                }
                ctx.consume(((tm * tn) as u64).div_ceil(ADDS_PER_CYCLE));
            }
            Compute::Free => {
                let freed = self.slot_of.remove(&self.task);
                if freed.is_none() {
                    return Err(FabricError::program(
                        ctx.pe(),
                        format!("terminate of task {} which holds no slot", self.task),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl PeProgram for WorkerProgram {
    fn sram_bytes(&self) -> u32 {
        self.layout.total()
    }

    fn on_irq(&mut self, ctx: &mut PeContext<'_>, irq: &Irq) -> evfabric_core::Result<()> {
        if irq.source != Some(self.scheduler) {
            return Err(FabricError::program(ctx.pe(), "command from a PE other than the scheduler"));
        }
        let cmd = Command::from_irq(irq.code, &irq.args).ok_or_else(|| {
            FabricError::program(ctx.pe(), format!("malformed command irq {} {:?}", irq.code, irq.args))
        })?;
        if self.plan.worker_of(cmd.task()) >= self.workers.len()
            || self.workers[self.plan.worker_of(cmd.task())] != ctx.pe()
        {
            return Err(FabricError::program(ctx.pe(), format!("task {} is not mine", cmd.task())));
        }
        self.queue.push_back(cmd);
        self.pump(ctx)
    }

    fn on_dma_done(&mut self, ctx: &mut PeContext<'_>, _tag: u64) -> evfabric_core::Result<()> {
        self.waiting = false;
        self.pump(ctx)
    }
}

/// Polls the flag table in its SRAM and drives the FSM.
pub struct SchedulerProgram {
    fsm: SchedulerFsm,
    workers: Vec<PeId>,
    period: Cycles,
    log: Vec<(Cycles, Command)>,
    error: Option<MatmulError>,
}

impl SchedulerProgram {
    pub fn fsm(&self) -> &SchedulerFsm {
        &self.fsm
    }

    fn send(&mut self, ctx: &mut PeContext<'_>, cmds: Vec<Command>) -> evfabric_core::Result<()> {
        for cmd in cmds {
            ctx.consume(COMMAND_CYCLES);
            let (code, args) = cmd.to_irq();
            let target = self.workers[self.fsm.plan().worker_of(cmd.task())];
            ctx.raise_irq(target, code, args)?;
            self.log.push((ctx.local_time(), cmd));
        }
        Ok(())
    }

    fn fail(&mut self, ctx: &PeContext<'_>, e: MatmulError) -> FabricError {
        let err = FabricError::program(ctx.pe(), e.to_string());
        self.error = Some(e);
        err
    }
}

impl PeProgram for SchedulerProgram {
    fn sram_bytes(&self) -> u32 {
        (self.fsm.plan().tasks.len() as u32 * FLAG_BYTES).max(FLAG_BYTES)
    }

    fn on_irq(&mut self, ctx: &mut PeContext<'_>, irq: &Irq) -> evfabric_core::Result<()> {
        if irq.source.is_some() || irq.code != IRQ_START {
            return Err(FabricError::program(ctx.pe(), "unexpected interrupt at the scheduler"));
        }
        let cmds = self.fsm.commands();
        self.send(ctx, cmds)?;
        ctx.schedule_timer(ctx.now() + self.period, 0)
    }

    fn on_timer(&mut self, ctx: &mut PeContext<'_>, tag: u64) -> evfabric_core::Result<()> {
        let n = self.fsm.plan().tasks.len();
        ctx.consume(POLL_BASE_CYCLES + POLL_CYCLES_PER_FLAG * n as u64);
        for t in 0..n {
            let raw = ctx.sram_read(t as u32 * FLAG_BYTES, FLAG_BYTES)?;
            let flag = match WorkerFlag::decode(t, raw) {
                Ok(f) => f,
                Err(e) => return Err(self.fail(ctx, e)),
            };
            if let Err(e) = self.fsm.observe(flag) {
                return Err(self.fail(ctx, e));
            }
        }
        let cmds = self.fsm.commands();
        self.send(ctx, cmds)?;
        if self.fsm.finished() {
            return Ok(());
        }
        // A long flag table takes longer to scan than the period; counting
        // from the end of the scan keeps polls from queueing up.
        ctx.schedule_timer(ctx.local_time() + self.period, tag + 1)
    }
}

#[derive(Clone, Debug)]
pub struct MatmulRun {
    pub c: Matrix<i32>,
    pub plan: TilingPlan,
    pub scheduler: PeId,
    pub workers: Vec<PeId>,
    /// Commands in issue order with the time each IRQ was raised.
    pub commands: Vec<(Cycles, Command)>,
    pub all_terminated: bool,
    pub pending_combines: usize,
    pub comm: CommLog,
    pub energy: EnergyReport,
    pub end_time: Cycles,
    pub trace: Option<Vec<TraceRecord>>,
}

/// PEs in `(chip_y, chip_x, core)` order.
fn pe_order(cfg: &MachineConfig) -> impl Iterator<Item = PeId> + '_ {
    (0..cfg.height).flat_map(move |y| {
        (0..cfg.width)
            .flat_map(move |x| (0..cfg.cores_per_chip).map(move |c| PeId::new(x, y, c)))
    })
}

fn tile_into(
    m: &Matrix<i8>,
    r0: usize,
    c0: usize,
    rows: usize,
    cols: usize,
) -> Vec<u8> {
    let mut out = vec![0u8; rows * cols];
    for r in 0..rows.min(m.rows.saturating_sub(r0)) {
        for c in 0..cols.min(m.cols.saturating_sub(c0)) {
            out[r * cols + c] = m.get(r0 + r, c0 + c) as u8;
        }
    }
    out
}

pub fn run_matmul(
    a: &Matrix<i8>,
    b: &Matrix<i8>,
    plan: &TilingPlan,
    cfg: &MachineConfig,
    opts: &MatmulOptions,
    model: &CostModel,
) -> Result<MatmulRun> {
    if (a.rows, a.cols, b.rows, b.cols) != (plan.m, plan.k, plan.k, plan.n) {
        return Err(MatmulError::InvalidDims(format!(
            "A is {}x{}, B is {}x{}, plan is for {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols, plan.m, plan.k, plan.k, plan.n
        )));
    }
    if opts.poll_period == 0 {
        return Err(MatmulError::InvalidDims("poll_period must be >= 1".into()));
    }
    let available = cfg.total_pes();
    if plan.workers + 1 > available {
        return Err(MatmulError::InvalidDims(format!(
            "{} workers and a scheduler need {} PEs, machine has {available}",
            plan.workers,
            plan.workers + 1
        )));
    }
    let mut pes = pe_order(cfg);
    let scheduler = pes.next().expect("machine has a PE");
    let workers: Vec<PeId> = pes.take(plan.workers).collect();

    let mut machine = Machine::new(cfg.clone())?;
    if opts.trace {
        machine.enable_trace();
    }
    let dram = DramLayout::new(plan);
    let (ti, tk, tj) = plan.tile_counts();
    let (tm, tkk, tn) = (plan.tile_m, plan.tile_k, plan.tile_n);
    for i in 0..ti {
        for k in 0..tk {
            let MemRef::Dram { addr, .. } = dram.a_tile(i, k) else { unreachable!() };
            machine.dram_write(DRAM_CHIP, addr, &tile_into(a, i * tm, k * tkk, tm, tkk))?;
        }
    }
    for k in 0..tk {
        for j in 0..tj {
            let MemRef::Dram { addr, .. } = dram.b_tile(k, j) else { unreachable!() };
            machine.dram_write(DRAM_CHIP, addr, &tile_into(b, k * tkk, j * tn, tkk, tn))?;
        }
    }

    machine.load(
        scheduler,
        Box::new(SchedulerProgram {
            fsm: SchedulerFsm::new(plan),
            workers: workers.clone(),
            period: opts.poll_period,
            log: Vec::new(),
            error: None,
        }),
    )?;
    for &w in &workers {
        machine.load(w, Box::new(WorkerProgram::new(plan, scheduler, workers.clone())))?;
    }
    machine.boot()?;
    machine.post_irq(scheduler, IRQ_START, Vec::new(), 0)?;
    if let Err(e) = machine.run_until_idle() {
        let sched = machine.program_mut::<SchedulerProgram>(scheduler);
        return Err(match sched.and_then(|s| s.error.take()) {
            Some(inner) => inner,
            None => e.into(),
        });
    }

    let sched = machine
        .program::<SchedulerProgram>(scheduler)
        .expect("scheduler is loaded");
    let all_terminated = sched.fsm.finished();
    let pending_combines = sched.fsm.pending_combines();
    let commands = sched.log.clone();

    let mut c = Matrix::<i32>::zeros(plan.m, plan.n);
    for i in 0..ti {
        for j in 0..tj {
            let MemRef::Dram { addr, .. } = dram.c_tile(i, j) else { unreachable!() };
            let bytes = machine.dram_read(DRAM_CHIP, addr, (tm * tn * 4) as u64)?;
            for r in 0..tm.min(plan.m - i * tm) {
                for col in 0..tn.min(plan.n - j * tn) {
                    let at = 4 * (r * tn + col);
                    let v = i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
                    c.set(i * tm + r, j * tn + col, v);
                }
            }
        }
    }
    let activity = machine.activity();
    let energy = account(&activity, model)?;
    Ok(MatmulRun {
        c,
        plan: plan.clone(),
        scheduler,
        workers,
        commands,
        all_terminated,
        pending_combines,
        comm: machine.comm_log().clone(),
        energy,
        end_time: activity.duration,
        trace: machine.trace().map(<[TraceRecord]>::to_vec),
    })
}

/// Communication summary of a run that passed the protocol audit.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub command_irqs: usize,
    pub flag_writes: usize,
    pub flag_bytes: u64,
    pub dram_to_worker_bytes: u64,
    /// Partial-result fetches, including ones between two slots of the
    /// same worker.
    pub worker_to_worker_bytes: u64,
    pub worker_to_dram_bytes: u64,
}

/// Checks that control and data travel on separate paths: interrupts only
/// from the scheduler to workers (plus the host's start), scheduler SRAM only
/// receiving 8-byte flag writes from the worker owning the task, the
/// scheduler issuing no DMA, no packets at all, and every other DMA moving
/// data between DRAM and worker SRAM or between worker SRAMs.
pub fn audit(run: &MatmulRun) -> Result<AuditSummary> {
    let bad = |msg: String| Err(MatmulError::Protocol(msg));
    let is_worker = |pe: PeId| run.workers.contains(&pe);
    let mut s = AuditSummary::default();
    for irq in &run.comm.irqs {
        match irq.source {
            None if irq.target == run.scheduler && irq.code == IRQ_START => {}
            Some(src) if src == run.scheduler && is_worker(irq.target) => s.command_irqs += 1,
            _ => return bad(format!("irq {irq:?} outside scheduler->worker control path")),
        }
    }
    if !run.comm.injections.is_empty() {
        return bad(format!("{} packets injected", run.comm.injections.len()));
    }
    for d in &run.comm.dmas {
        let req = d.request;
        if d.issuer == run.scheduler || !is_worker(d.issuer) {
            return bad(format!("dma issued by {}", d.issuer));
        }
        if req.src.pe() == Some(run.scheduler) {
            return bad(format!("dma reads scheduler SRAM: {d:?}"));
        }
        if let MemRef::Sram { pe, addr } = req.dst {
            if pe == run.scheduler {
                let task = (addr / FLAG_BYTES) as usize;
                let owner = run.workers.get(run.plan.worker_of(task.min(run.plan.tasks.len())));
                if req.len != FLAG_BYTES as u64
                    || addr % FLAG_BYTES != 0
                    || task >= run.plan.tasks.len()
                    || req.src.pe() != Some(d.issuer)
                    || owner != Some(&d.issuer)
                {
                    return bad(format!("non-flag write into scheduler SRAM: {d:?}"));
                }
                s.flag_writes += 1;
                s.flag_bytes += req.len;
                continue;
            }
        }
        match (req.src, req.dst) {
            (MemRef::Dram { .. }, MemRef::Sram { pe, .. }) if is_worker(pe) => {
                s.dram_to_worker_bytes += req.len
            }
            (MemRef::Sram { pe: a, .. }, MemRef::Sram { pe: b, .. })
                if is_worker(a) && is_worker(b) =>
            {
                s.worker_to_worker_bytes += req.len
            }
            (MemRef::Sram { pe, .. }, MemRef::Dram { .. }) if is_worker(pe) => {
                s.worker_to_dram_bytes += req.len
            }
            _ => return bad(format!("dma outside the data path: {d:?}")),
        }
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatmulReport {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub tiles: [usize; 3],
    pub padding: [usize; 3],
    pub workers: usize,
    pub tasks: usize,
    pub commands: BTreeMap<String, usize>,
    pub audit: AuditSummary,
    pub dma_bytes: u64,
    pub end_time: Cycles,
    pub energy_total: u64,
    pub energy: EnergyReport,
}

impl MatmulRun {
    pub fn command_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for (_, c) in &self.commands {
            *out.entry(c.name().to_string()).or_insert(0) += 1;
        }
        out
    }

    pub fn report(&self) -> Result<MatmulReport> {
        let p = &self.plan;
        Ok(MatmulReport {
            m: p.m,
            k: p.k,
            n: p.n,
            tiles: [p.tile_m, p.tile_k, p.tile_n],
            padding: [p.padding.0, p.padding.1, p.padding.2],
            workers: p.workers,
            tasks: p.tasks.len(),
            commands: self.command_counts(),
            audit: audit(self)?,
            dma_bytes: self.comm.dmas.iter().map(|d| d.request.len).sum(),
            end_time: self.end_time,
            energy_total: self.energy.total(),
            energy: self.energy.clone(),
        })
    }
}
