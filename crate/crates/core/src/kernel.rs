//! The discrete-event kernel.
//!
//! Events are dispatched one at a time in the strict total order
//! `(time, class priority, chip_y, chip_x, core, seq)`. Each loaded PE runs a
//! [`PeProgram`], a set of host callbacks bound per event class. A handler
//! charges its work with [`PeContext::consume`]; anything it emits afterwards
//! leaves the PE at the handler's local time. A PE executes one handler at a
//! time, so an event arriving while the PE is still busy starts when the
//! previous handler finishes.

use std::any::Any;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::activity::{Activity, PeCounters};
use crate::config::MachineConfig;
use crate::error::{FabricError, Result};
use crate::event::{Cycles, Event, EventBody, Irq};
use crate::memory::{check_range, Dram, DmaRequest, MemRef};
use crate::packet::{Packet, PacketKind};
use crate::router::{route_packet, Arrival, RoutingTable};
use crate::topology::{hop_distance, next_hop, ChipCoord, PeId, TorusDims};
use crate::trace::{CommLog, DmaRecord, InjectionRecord, IrqRecord, TraceRecord, PACKET_TX};

/// Host-side behaviour of one PE. Every handler defaults to a no-op.
pub trait PeProgram: Any {
    /// Bytes of SRAM the program image and its data occupy.
    fn sram_bytes(&self) -> u32;

    fn on_start(&mut self, _ctx: &mut PeContext<'_>) -> Result<()> {
        Ok(())
    }

    fn on_timer(&mut self, _ctx: &mut PeContext<'_>, _tag: u64) -> Result<()> {
        Ok(())
    }

    fn on_packet(&mut self, _ctx: &mut PeContext<'_>, _pkt: &Packet) -> Result<()> {
        Ok(())
    }

    fn on_dma_done(&mut self, _ctx: &mut PeContext<'_>, _tag: u64) -> Result<()> {
        Ok(())
    }

    fn on_irq(&mut self, _ctx: &mut PeContext<'_>, _irq: &Irq) -> Result<()> {
        Ok(())
    }

    fn on_user(&mut self, _ctx: &mut PeContext<'_>, _tag: u64, _data: u64) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeMode {
    Run,
    Sleep,
}

/// Snapshot of one PE's kernel-side state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeState {
    pub sram_used: u32,
    pub sram_capacity: u32,
    pub mode: PeMode,
    pub perf_level: usize,
    pub loaded: bool,
}

struct PeSlot {
    loaded: bool,
    sram: Vec<u8>,
    busy_until: Cycles,
    counters: PeCounters,
}

/// Everything except the programs, so a program can run while borrowing the
/// rest of the machine through its [`PeContext`].
struct Kernel {
    cfg: MachineConfig,
    dims: TorusDims,
    now: Cycles,
    seq: u64,
    queue: BinaryHeap<Reverse<Event>>,
    pes: Vec<PeSlot>,
    tables: Vec<RoutingTable>,
    dram: Vec<Dram>,
    trace: Option<Vec<TraceRecord>>,
    comm: CommLog,
    dispatched: u64,
}

impl Kernel {
    fn pe_index(&self, pe: PeId) -> Result<usize> {
        if !self.dims.contains(pe.chip) || pe.core >= self.cfg.cores_per_chip {
            return Err(FabricError::BadPe(pe));
        }
        Ok(self.dims.index(pe.chip) * self.cfg.cores_per_chip as usize + pe.core as usize)
    }

    fn pe_id(&self, idx: usize) -> PeId {
        let cores = self.cfg.cores_per_chip as usize;
        let chip = self.dims.coord(idx / cores);
        PeId {
            chip,
            core: (idx % cores) as u16,
        }
    }

    fn chip_index(&self, chip: ChipCoord) -> Result<usize> {
        if !self.dims.contains(chip) {
            return Err(FabricError::BadChip(chip));
        }
        Ok(self.dims.index(chip))
    }

    fn push(&mut self, time: Cycles, target: PeId, body: EventBody) -> Result<()> {
        if time < self.now {
            return Err(FabricError::EventInPast { at: time, now: self.now });
        }
        self.pe_index(target)?;
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(Event {
            time,
            target,
            seq,
            body,
        }));
        Ok(())
    }

    fn record(&mut self, rec: impl FnOnce() -> TraceRecord) {
        if let Some(t) = self.trace.as_mut() {
            t.push(rec());
        }
    }

    /// Latency of an on-chip or cross-chip notification between two PEs.
    fn signal_latency(&self, from: PeId, to: PeId) -> Cycles {
        let hops = hop_distance(from.chip, to.chip, self.dims) as Cycles;
        self.cfg.noc_latency + hops * (self.cfg.router_latency + self.cfg.link_latency)
    }

    /// Walks a multicast packet through the routers and enqueues one
    /// `packet_rx` per delivered copy. Returns the number of copies.
    fn route_multicast(&mut self, pkt: Packet, t0: Cycles) -> Result<usize> {
        let max_hops = self.dims.chip_count() as u32;
        let mut frontier = VecDeque::from([(pkt.origin.chip, Arrival::Local, t0, 0u32)]);
        let mut copies = 0;
        while let Some((chip, arrival, t, hops)) = frontier.pop_front() {
            if hops > max_hops {
                return Err(FabricError::RoutingLoop { key: pkt.key, hops });
            }
            let table = &self.tables[self.dims.index(chip)];
            let decision = route_packet(table, chip, pkt.key, arrival)?;
            let t_out = t + self.cfg.router_latency;
            for &core in &decision.local_pes {
                self.push(t_out, PeId { chip, core }, EventBody::Packet(pkt.clone()))?;
                copies += 1;
            }
            for port in decision.links.ports() {
                let next = self.dims.neighbor(chip, port);
                frontier.push_back((
                    next,
                    Arrival::Link(port.opposite()),
                    t_out + self.cfg.link_latency,
                    hops + 1,
                ));
            }
        }
        Ok(copies)
    }

    fn route_p2p(&mut self, pkt: Packet, dest: PeId, t0: Cycles) -> Result<()> {
        self.pe_index(dest)?;
        let mut chip = pkt.origin.chip;
        let mut t = t0;
        while let Some(port) = next_hop(chip, dest.chip, self.dims) {
            t += self.cfg.router_latency + self.cfg.link_latency;
            chip = self.dims.neighbor(chip, port);
        }
        self.push(t + self.cfg.router_latency, dest, EventBody::Packet(pkt))
    }

    fn inject(&mut self, mut pkt: Packet, at: Cycles) -> Result<usize> {
        pkt.inject_time = at;
        let origin = pkt.origin;
        let key = pkt.key;
        let kind = pkt.kind;
        let copies = match kind {
            PacketKind::Multicast => self.route_multicast(pkt, at)?,
            PacketKind::PointToPoint { dest } => {
                self.route_p2p(pkt, dest, at)?;
                1
            }
        };
        let idx = self.pe_index(origin)?;
        self.pes[idx].counters.bump(PACKET_TX, 1);
        self.comm.injections.push(InjectionRecord {
            time: at,
            origin,
            key,
            kind,
            copies,
        });
        self.record(|| TraceRecord::new(at, PACKET_TX, origin, Some(key), format!("copies={copies}")));
        Ok(copies)
    }

    fn check_mem(&self, m: &MemRef, len: u64) -> Result<()> {
        match *m {
            MemRef::Sram { pe, addr } => {
                let idx = self.pe_index(pe)?;
                let slot = &self.pes[idx];
                if !slot.loaded {
                    return Err(FabricError::NotLoaded(pe));
                }
                check_range(addr as u64, len, slot.sram.len() as u64)
            }
            MemRef::Dram { chip, addr } => {
                self.chip_index(chip)?;
                check_range(addr, len, crate::memory::DRAM_BYTES)
            }
        }
    }

    fn dma(&mut self, issuer: PeId, req: DmaRequest, tag: u64, at: Cycles) -> Result<Cycles> {
        self.check_mem(&req.src, req.len)?;
        self.check_mem(&req.dst, req.len)?;
        let done = at + self.cfg.dma_base_latency + req.len.div_ceil(self.cfg.dma_bytes_per_cycle);
        let idx = self.pe_index(issuer)?;
        self.pes[idx].counters.dma_bytes += req.len;
        self.comm.dmas.push(DmaRecord {
            time: at,
            issuer,
            request: req,
            tag,
            completes_at: done,
        });
        self.push(done, issuer, EventBody::DmaDone { tag, request: req })?;
        Ok(done)
    }

    fn read_mem(&self, m: &MemRef, len: u64) -> Result<Vec<u8>> {
        match *m {
            MemRef::Sram { pe, addr } => {
                let idx = self.pe_index(pe)?;
                let sram = &self.pes[idx].sram;
                check_range(addr as u64, len, sram.len() as u64)?;
                Ok(sram[addr as usize..addr as usize + len as usize].to_vec())
            }
            MemRef::Dram { chip, addr } => self.dram[self.chip_index(chip)?].read(addr, len),
        }
    }

    fn write_mem(&mut self, m: &MemRef, data: &[u8]) -> Result<()> {
        match *m {
            MemRef::Sram { pe, addr } => {
                let idx = self.pe_index(pe)?;
                let sram = &mut self.pes[idx].sram;
                check_range(addr as u64, data.len() as u64, sram.len() as u64)?;
                sram[addr as usize..addr as usize + data.len()].copy_from_slice(data);
                Ok(())
            }
            MemRef::Dram { chip, addr } => {
                let i = self.chip_index(chip)?;
                self.dram[i].write(addr, data)
            }
        }
    }

    fn irq(&mut self, source: Option<PeId>, target: PeId, code: u32, args: Vec<u32>, at: Cycles) -> Result<()> {
        self.comm.irqs.push(IrqRecord {
            time: at,
            source,
            target,
            code,
        });
        self.push(at, target, EventBody::Irq(Irq { source, code, args }))
    }
}

/// A PE's view of the machine while one of its handlers runs.
pub struct PeContext<'a> {
    k: &'a mut Kernel,
    pe: PeId,
    idx: usize,
    start: Cycles,
    busy: Cycles,
}

impl<'a> PeContext<'a> {
    pub fn pe(&self) -> PeId {
        self.pe
    }

    /// Time of the event being handled.
    pub fn now(&self) -> Cycles {
        self.k.now
    }

    /// Time at which work issued now leaves the PE.
    pub fn local_time(&self) -> Cycles {
        self.start + self.busy
    }

    pub fn config(&self) -> &MachineConfig {
        &self.k.cfg
    }

    pub fn perf_level(&self) -> usize {
        self.k.pes[self.idx].counters.level
    }

    /// Charges `core_cycles` of work, stretched by the current DVFS level.
    pub fn consume(&mut self, core_cycles: u64) {
        let level = self.perf_level();
        let cycles = core_cycles * self.k.cfg.dvfs[level].cycle_multiplier;
        self.busy += cycles;
        self.k.pes[self.idx].counters.busy[level] += cycles;
    }

    /// Counts `n` application operations of class `class`.
    pub fn count(&mut self, class: &'static str, n: u64) {
        self.k.pes[self.idx].counters.bump(class, n);
    }

    /// Takes effect at the boundary of the current event.
    pub fn set_perf_level(&mut self, level: usize) -> Result<()> {
        let levels = self.k.cfg.dvfs.len();
        if level >= levels {
            return Err(FabricError::BadLevel { level, levels });
        }
        let now = self.k.now;
        self.k.pes[self.idx].counters.switch_level(level, now);
        Ok(())
    }

    pub fn schedule_timer(&mut self, at: Cycles, tag: u64) -> Result<()> {
        self.k.push(at, self.pe, EventBody::Timer { tag })
    }

    pub fn schedule_user(&mut self, at: Cycles, tag: u64, data: u64) -> Result<()> {
        self.k.push(at, self.pe, EventBody::User { tag, data })
    }

    /// Injects a multicast packet; returns the number of delivered copies.
    pub fn send_multicast(&mut self, key: u32, payload: &[u8]) -> Result<usize> {
        let pkt = Packet::multicast(key, self.pe, payload)?;
        let t = self.local_time();
        self.k.inject(pkt, t)
    }

    pub fn send_p2p(&mut self, dest: PeId, key: u32, payload: &[u8]) -> Result<()> {
        let pkt = Packet::point_to_point(dest, key, self.pe, payload)?;
        let t = self.local_time();
        self.k.inject(pkt, t).map(|_| ())
    }

    /// Raises an interrupt on another PE; returns its arrival time.
    pub fn raise_irq(&mut self, target: PeId, code: u32, args: Vec<u32>) -> Result<Cycles> {
        let at = self.local_time() + self.k.signal_latency(self.pe, target);
        self.k.irq(Some(self.pe), target, code, args, at)?;
        Ok(at)
    }

    /// Starts a DMA transfer; completion raises `dma_done` with `tag` here.
    pub fn dma(&mut self, req: DmaRequest, tag: u64) -> Result<Cycles> {
        let t = self.local_time();
        self.k.dma(self.pe, req, tag, t)
    }

    pub fn sram(&self) -> &[u8] {
        &self.k.pes[self.idx].sram
    }

    pub fn sram_mut(&mut self) -> &mut [u8] {
        &mut self.k.pes[self.idx].sram
    }

    pub fn sram_read(&self, addr: u32, len: u32) -> Result<&[u8]> {
        let sram = self.sram();
        check_range(addr as u64, len as u64, sram.len() as u64)?;
        Ok(&sram[addr as usize..(addr + len) as usize])
    }

    pub fn sram_write(&mut self, addr: u32, data: &[u8]) -> Result<()> {
        let sram = self.sram_mut();
        check_range(addr as u64, data.len() as u64, sram.len() as u64)?;
        sram[addr as usize..addr as usize + data.len()].copy_from_slice(data);
        Ok(())
    }
}

/// A simulated machine: torus of chips, each with cores, DRAM and a router.
pub struct Machine {
    k: Kernel,
    programs: Vec<Option<Box<dyn PeProgram>>>,
}

impl Machine {
    pub fn new(cfg: MachineConfig) -> Result<Self> {
        cfg.validate()?;
        let dims = cfg.dims();
        let n_pe = cfg.total_pes();
        let levels = cfg.dvfs.len();
        let pes = (0..n_pe)
            .map(|_| PeSlot {
                loaded: false,
                sram: Vec::new(),
                busy_until: 0,
                counters: PeCounters::new(levels, cfg.default_perf_level, 0),
            })
            .collect();
        let k = Kernel {
            dims,
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            pes,
            tables: vec![RoutingTable::new(); dims.chip_count()],
            dram: vec![Dram::default(); dims.chip_count()],
            trace: None,
            comm: CommLog::default(),
            dispatched: 0,
            cfg,
        };
        Ok(Self {
            k,
            programs: (0..n_pe).map(|_| None).collect(),
        })
    }

    pub fn config(&self) -> &MachineConfig {
        &self.k.cfg
    }

    pub fn dims(&self) -> TorusDims {
        self.k.dims
    }

    pub fn now(&self) -> Cycles {
        self.k.now
    }

    pub fn enable_trace(&mut self) {
        if self.k.trace.is_none() {
            self.k.trace = Some(Vec::new());
        }
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.k.trace.as_deref()
    }

    pub fn comm_log(&self) -> &CommLog {
        &self.k.comm
    }

    pub fn events_dispatched(&self) -> u64 {
        self.k.dispatched
    }

    pub fn pending_events(&self) -> usize {
        self.k.queue.len()
    }

    /// Loads a program, rejecting it if its image does not fit in SRAM.
    pub fn load(&mut self, pe: PeId, program: Box<dyn PeProgram>) -> Result<()> {
        let idx = self.k.pe_index(pe)?;
        let requested = program.sram_bytes();
        let capacity = self.k.cfg.sram_bytes;
        if requested > capacity {
            return Err(FabricError::SramExceeded {
                pe,
                requested: requested as u64,
                capacity: capacity as u64,
            });
        }
        let slot = &mut self.k.pes[idx];
        slot.loaded = true;
        slot.sram = vec![0; requested as usize];
        self.programs[idx] = Some(program);
        Ok(())
    }

    pub fn pe_state(&self, pe: PeId) -> Result<PeState> {
        let idx = self.k.pe_index(pe)?;
        let slot = &self.k.pes[idx];
        Ok(PeState {
            sram_used: slot.sram.len() as u32,
            sram_capacity: self.k.cfg.sram_bytes,
            mode: if slot.busy_until > self.k.now {
                PeMode::Run
            } else {
                PeMode::Sleep
            },
            perf_level: slot.counters.level,
            loaded: slot.loaded,
        })
    }

    pub fn loaded_pes(&self) -> Vec<PeId> {
        (0..self.k.pes.len())
            .filter(|&i| self.k.pes[i].loaded)
            .map(|i| self.k.pe_id(i))
            .collect()
    }

    pub fn program<T: PeProgram>(&self, pe: PeId) -> Option<&T> {
        let idx = self.k.pe_index(pe).ok()?;
        let p: &dyn Any = self.programs[idx].as_deref()?;
        p.downcast_ref()
    }

    pub fn program_mut<T: PeProgram>(&mut self, pe: PeId) -> Option<&mut T> {
        let idx = self.k.pe_index(pe).ok()?;
        let p: &mut dyn Any = self.programs[idx].as_deref_mut()?;
        p.downcast_mut()
    }

    pub fn set_table(&mut self, chip: ChipCoord, table: RoutingTable) -> Result<()> {
        for e in &table.entries {
            e.validate()?;
        }
        let i = self.k.chip_index(chip)?;
        self.k.tables[i] = table;
        Ok(())
    }

    pub fn table(&self, chip: ChipCoord) -> Result<&RoutingTable> {
        Ok(&self.k.tables[self.k.chip_index(chip)?])
    }

    pub fn set_perf_level(&mut self, pe: PeId, level: usize) -> Result<()> {
        let levels = self.k.cfg.dvfs.len();
        if level >= levels {
            return Err(FabricError::BadLevel { level, levels });
        }
        let idx = self.k.pe_index(pe)?;
        let now = self.k.now;
        self.k.pes[idx].counters.switch_level(level, now);
        Ok(())
    }

    pub fn sram_read(&self, pe: PeId, addr: u32, len: u32) -> Result<Vec<u8>> {
        self.k.read_mem(&MemRef::sram(pe, addr), len as u64)
    }

    pub fn sram_write(&mut self, pe: PeId, addr: u32, data: &[u8]) -> Result<()> {
        self.k.write_mem(&MemRef::sram(pe, addr), data)
    }

    pub fn dram_read(&self, chip: ChipCoord, addr: u64, len: u64) -> Result<Vec<u8>> {
        self.k.read_mem(&MemRef::dram(chip, addr), len)
    }

    pub fn dram_write(&mut self, chip: ChipCoord, addr: u64, data: &[u8]) -> Result<()> {
        self.k.write_mem(&MemRef::dram(chip, addr), data)
    }

    /// Host interrupt delivered to `target` at time `at`.
    pub fn post_irq(&mut self, target: PeId, code: u32, args: Vec<u32>, at: Cycles) -> Result<()> {
        self.k.irq(None, target, code, args, at)
    }

    pub fn post_timer(&mut self, target: PeId, at: Cycles, tag: u64) -> Result<()> {
        self.k.push(at, target, EventBody::Timer { tag })
    }

    pub fn post_user(&mut self, target: PeId, at: Cycles, tag: u64, data: u64) -> Result<()> {
        self.k.push(at, target, EventBody::User { tag, data })
    }

    /// Injects a packet at the current time as if sent by `pkt.origin`.
    pub fn inject(&mut self, pkt: Packet) -> Result<usize> {
        let now = self.k.now;
        self.k.inject(pkt, now)
    }

    /// Runs every loaded program's `on_start` hook in PE order.
    pub fn boot(&mut self) -> Result<()> {
        for idx in 0..self.programs.len() {
            if self.programs[idx].is_none() {
                continue;
            }
            let pe = self.k.pe_id(idx);
            let start = self.k.now.max(self.k.pes[idx].busy_until);
            let prog = self.programs[idx].as_deref_mut().unwrap();
            let mut ctx = PeContext {
                k: &mut self.k,
                pe,
                idx,
                start,
                busy: 0,
            };
            prog.on_start(&mut ctx)?;
            let end = ctx.start + ctx.busy;
            self.k.pes[idx].busy_until = end;
        }
        Ok(())
    }

    /// Dispatches every event with `time <= until`, then sets the clock to
    /// `until`. Returns the number of events processed.
    pub fn advance(&mut self, until: Cycles) -> Result<u64> {
        if until < self.k.now {
            return Err(FabricError::EventInPast {
                at: until,
                now: self.k.now,
            });
        }
        let mut n = 0;
        while self.k.queue.peek().is_some_and(|e| e.0.time <= until) {
            let Reverse(ev) = self.k.queue.pop().unwrap();
            self.dispatch(ev)?;
            n += 1;
        }
        self.k.now = until;
        Ok(n)
    }

    /// Dispatches events until the queue is empty.
    pub fn run_until_idle(&mut self) -> Result<u64> {
        let mut n = 0;
        while let Some(Reverse(ev)) = self.k.queue.pop() {
            self.dispatch(ev)?;
            n += 1;
        }
        Ok(n)
    }

    /// Latest of the clock and every PE's end of work.
    pub fn end_time(&self) -> Cycles {
        self.k
            .pes
            .iter()
            .map(|p| p.busy_until)
            .fold(self.k.now, Cycles::max)
    }

    /// Activity of all loaded PEs from time 0 to [`Machine::end_time`].
    pub fn activity(&self) -> Activity {
        self.activity_until(self.end_time())
    }

    pub fn activity_until(&self, duration: Cycles) -> Activity {
        let pes = (0..self.k.pes.len())
            .filter(|&i| self.k.pes[i].loaded)
            .map(|i| self.k.pes[i].counters.snapshot(self.k.pe_id(i), duration))
            .collect();
        Activity {
            duration,
            sleep_enabled: self.k.cfg.sleep_enabled,
            pes,
        }
    }

    fn dispatch(&mut self, ev: Event) -> Result<()> {
        debug_assert!(ev.time >= self.k.now);
        self.k.now = ev.time;
        self.k.dispatched += 1;
        let idx = self.k.pe_index(ev.target)?;
        let class = ev.class();
        if let EventBody::DmaDone { request, .. } = &ev.body {
            let data = self.k.read_mem(&request.src, request.len)?;
            self.k.write_mem(&request.dst, &data)?;
        }
        self.k.pes[idx].counters.bump(class.name(), 1);
        if self.k.trace.is_some() {
            let rec = trace_record(&ev);
            self.k.record(|| rec);
        }
        let pe = ev.target;
        let prog = self.programs[idx]
            .as_deref_mut()
            .ok_or(FabricError::NotLoaded(pe))?;
        let start = ev.time.max(self.k.pes[idx].busy_until);
        let mut ctx = PeContext {
            k: &mut self.k,
            pe,
            idx,
            start,
            busy: 0,
        };
        match &ev.body {
            EventBody::Packet(p) => prog.on_packet(&mut ctx, p)?,
            EventBody::DmaDone { tag, .. } => prog.on_dma_done(&mut ctx, *tag)?,
            EventBody::Timer { tag } => prog.on_timer(&mut ctx, *tag)?,
            EventBody::Irq(irq) => prog.on_irq(&mut ctx, irq)?,
            EventBody::User { tag, data } => prog.on_user(&mut ctx, *tag, *data)?,
        }
        let end = ctx.start + ctx.busy;
        self.k.pes[idx].busy_until = end;
        Ok(())
    }
}

fn trace_record(ev: &Event) -> TraceRecord {
    let class = ev.class();
    let (key, detail) = match &ev.body {
        EventBody::Packet(p) => (
            Some(p.key),
            format!("from={}.{}.{}", p.origin.chip.x, p.origin.chip.y, p.origin.core),
        ),
        EventBody::DmaDone { tag, request } => (None, format!("tag={tag} len={}", request.len)),
        EventBody::Timer { tag } => (None, format!("tag={tag}")),
        EventBody::Irq(irq) => {
            let src = match irq.source {
                Some(s) => format!("{}.{}.{}", s.chip.x, s.chip.y, s.core),
                None => "host".to_string(),
            };
            (None, format!("code={} src={src}", irq.code))
        }
        EventBody::User { tag, data } => (None, format!("tag={tag} data={data}")),
    };
    TraceRecord::new(ev.time, class.name(), ev.target, key, detail)
}
