use std::collections::BTreeSet;

use evfabric_core::memory::DRAM_BYTES;
use evfabric_core::trace::trace_csv_bytes;
use evfabric_core::*;
use evfabric_oracles::torus::{bfs_distances, bfs_hop_distance, mesh_torus_diameter};
use proptest::prelude::*;

fn dims(w: u16, h: u16) -> TorusDims {
    TorusDims::new(w, h).unwrap()
}

#[test]
fn hop_distance_matches_bfs_exhaustively() {
    for (w, h) in [(1, 1), (2, 3), (3, 8), (5, 7), (8, 8), (6, 2)] {
        let d = dims(w, h);
        for a in d.chips() {
            let table = bfs_distances(w as i64, h as i64, (a.x as i64, a.y as i64));
            for b in d.chips() {
                assert_eq!(
                    hop_distance(a, b, d),
                    table[d.index(b)],
                    "{a} -> {b} on {w}x{h}"
                );
            }
        }
    }
}

#[test]
fn hop_distance_worked_example() {
    // Frozen from the BFS oracle.
    let expected = bfs_hop_distance(8, 8, (0, 0), (2, 5));
    assert_eq!(expected, 5);
    assert_eq!(hop_distance(ChipCoord::new(0, 0), ChipCoord::new(2, 5), dims(8, 8)), 5);
}

#[test]
fn six_link_torus_beats_mesh_torus_diameter() {
    let d = dims(8, 8);
    let diameter = d
        .chips()
        .flat_map(|a| d.chips().map(move |b| (a, b)))
        .map(|(a, b)| hop_distance(a, b, d))
        .max()
        .unwrap();
    assert_eq!(mesh_torus_diameter(8, 8), 8);
    assert!(diameter < 8, "diameter {diameter}");
}

proptest! {
    #[test]
    fn hop_distance_symmetric_and_translation_invariant(
        w in 1u16..10, h in 1u16..10,
        ax in 0u16..10, ay in 0u16..10, bx in 0u16..10, by in 0u16..10,
        tx in 0u16..10, ty in 0u16..10,
    ) {
        let d = dims(w, h);
        let a = ChipCoord::new(ax % w, ay % h);
        let b = ChipCoord::new(bx % w, by % h);
        prop_assert_eq!(hop_distance(a, b, d), hop_distance(b, a, d));
        let shift = |c: ChipCoord| ChipCoord::new((c.x + tx) % w, (c.y + ty) % h);
        prop_assert_eq!(hop_distance(a, b, d), hop_distance(shift(a), shift(b), d));
    }
}

/// Test program: records every event it sees and optionally reacts.
#[derive(Default)]
struct Probe {
    sram: u32,
    seen: Vec<(Cycles, &'static str, u64)>,
    timer_period: Option<Cycles>,
    timer_limit: Cycles,
    work_per_event: u64,
    dma_on_start: Option<(DmaRequest, u64)>,
    send_on_timer: Option<u32>,
    schedule_past: bool,
}

impl PeProgram for Probe {
    fn sram_bytes(&self) -> u32 {
        self.sram
    }

    fn on_start(&mut self, ctx: &mut PeContext<'_>) -> Result<()> {
        if let Some(p) = self.timer_period {
            ctx.schedule_timer(p, 0)?;
        }
        if let Some((req, tag)) = self.dma_on_start {
            ctx.dma(req, tag)?;
        }
        Ok(())
    }

    fn on_timer(&mut self, ctx: &mut PeContext<'_>, tag: u64) -> Result<()> {
        self.seen.push((ctx.now(), "timer", tag));
        ctx.consume(self.work_per_event);
        if self.schedule_past {
            ctx.schedule_timer(ctx.now() - 1, 0)?;
        }
        if let Some(k) = self.send_on_timer {
            ctx.send_multicast(k, &[])?;
        }
        if let Some(p) = self.timer_period {
            let next = ctx.now() + p;
            if next <= self.timer_limit {
                ctx.schedule_timer(next, tag + 1)?;
            }
        }
        Ok(())
    }

    fn on_packet(&mut self, ctx: &mut PeContext<'_>, pkt: &Packet) -> Result<()> {
        self.seen.push((ctx.now(), "packet_rx", pkt.key as u64));
        ctx.consume(self.work_per_event);
        Ok(())
    }

    fn on_dma_done(&mut self, ctx: &mut PeContext<'_>, tag: u64) -> Result<()> {
        self.seen.push((ctx.now(), "dma_done", tag));
        Ok(())
    }

    fn on_user(&mut self, ctx: &mut PeContext<'_>, tag: u64, _data: u64) -> Result<()> {
        self.seen.push((ctx.now(), "user", tag));
        ctx.consume(self.work_per_event);
        // Report handler completion time.
        self.seen.push((ctx.local_time(), "done", tag));
        Ok(())
    }
}

fn small_machine(w: u16, h: u16, cores: u16) -> Machine {
    Machine::new(MachineConfig {
        width: w,
        height: h,
        cores_per_chip: cores,
        ..MachineConfig::default()
    })
    .unwrap()
}

#[test]
fn advance_on_empty_queue() {
    let mut m = small_machine(1, 1, 4);
    assert_eq!(m.advance(1000).unwrap(), 0);
    assert_eq!(m.now(), 1000);
    assert!(m.advance(10).is_err());
}

#[test]
fn equal_time_events_tie_break_by_core() {
    let mut m = small_machine(1, 1, 4);
    m.enable_trace();
    for c in [1, 0] {
        m.load(PeId::new(0, 0, c), Box::new(Probe::default())).unwrap();
        m.post_user(PeId::new(0, 0, c), 5, c as u64, 0).unwrap();
    }
    assert_eq!(m.advance(10).unwrap(), 2);
    let cores: Vec<u16> = m.trace().unwrap().iter().map(|r| r.core).collect();
    assert_eq!(cores, vec![0, 1]);
}

#[test]
fn periodic_timer_count() {
    let mut m = small_machine(1, 1, 1);
    let pe = PeId::new(0, 0, 0);
    m.load(
        pe,
        Box::new(Probe {
            timer_period: Some(10),
            timer_limit: 100,
            ..Probe::default()
        }),
    )
    .unwrap();
    m.boot().unwrap();
    m.advance(100).unwrap();
    let p: &Probe = m.program(pe).unwrap();
    let ticks: Vec<Cycles> = p.seen.iter().map(|s| s.0).collect();
    assert_eq!(ticks.len() as u64, 100 / 10);
    assert_eq!(ticks, (1..=10).map(|i| i * 10).collect::<Vec<_>>());
}

#[test]
fn handler_scheduling_in_the_past_fails() {
    let mut m = small_machine(1, 1, 1);
    let pe = PeId::new(0, 0, 0);
    m.load(
        pe,
        Box::new(Probe {
            timer_period: Some(10),
            timer_limit: 100,
            schedule_past: true,
            ..Probe::default()
        }),
    )
    .unwrap();
    m.boot().unwrap();
    assert!(matches!(m.advance(100), Err(FabricError::EventInPast { at: 9, now: 10 })));
}

#[test]
fn single_hop_local_delivery_latency() {
    let mut m = small_machine(1, 1, 4);
    let src = PeId::new(0, 0, 0);
    let dst = PeId::new(0, 0, 3);
    for pe in [src, dst] {
        m.load(pe, Box::new(Probe::default())).unwrap();
    }
    let mut t = RoutingTable::new();
    t.push(RoutingEntry::new(0x40, 0xFFFF_FFC0, LinkSet::empty(), [3]).unwrap())
        .unwrap();
    m.set_table(ChipCoord::new(0, 0), t).unwrap();
    m.advance(50).unwrap();
    assert_eq!(m.inject(Packet::multicast(0x41, src, &[]).unwrap()).unwrap(), 1);
    m.run_until_idle().unwrap();
    let p: &Probe = m.program(dst).unwrap();
    assert_eq!(p.seen, vec![(50 + m.config().router_latency, "packet_rx", 0x41)]);
}

#[test]
fn multicast_fan_out_duplicates_at_branch() {
    let mut m = small_machine(2, 1, 8);
    let src = PeId::new(0, 0, 0);
    for pe in [src, PeId::new(0, 0, 2), PeId::new(0, 0, 7), PeId::new(1, 0, 5)] {
        m.load(pe, Box::new(Probe::default())).unwrap();
    }
    let mut t0 = RoutingTable::new();
    t0.push(RoutingEntry::new(0x100, 0xFFFF_FF00, LinkSet::E, [2, 7]).unwrap())
        .unwrap();
    let mut t1 = RoutingTable::new();
    t1.push(RoutingEntry::new(0x100, 0xFFFF_FF00, LinkSet::empty(), [5]).unwrap())
        .unwrap();
    m.set_table(ChipCoord::new(0, 0), t0).unwrap();
    m.set_table(ChipCoord::new(1, 0), t1).unwrap();
    assert_eq!(m.inject(Packet::multicast(0x101, src, &[]).unwrap()).unwrap(), 3);
    m.run_until_idle().unwrap();
    let c = m.config().clone();
    let far: &Probe = m.program(PeId::new(1, 0, 5)).unwrap();
    assert_eq!(
        far.seen[0].0,
        c.router_latency + c.link_latency + c.router_latency
    );
}

#[test]
fn unmatched_local_injection_is_no_route() {
    let mut m = small_machine(1, 1, 1);
    let pe = PeId::new(0, 0, 0);
    m.load(pe, Box::new(Probe::default())).unwrap();
    assert!(matches!(
        m.inject(Packet::multicast(7, pe, &[]).unwrap()),
        Err(FabricError::NoRoute { key: 7, .. })
    ));
}

#[test]
fn straight_through_loop_is_detected() {
    let mut m = small_machine(3, 1, 1);
    let pe = PeId::new(0, 0, 0);
    m.load(pe, Box::new(Probe::default())).unwrap();
    // Source sends east; nobody else has an entry, so it circles the ring and
    // re-enters the source router, which forwards east again.
    let mut t = RoutingTable::new();
    t.push(RoutingEntry::new(0, 0, LinkSet::E, []).unwrap()).unwrap();
    m.set_table(ChipCoord::new(0, 0), t).unwrap();
    assert!(matches!(
        m.inject(Packet::multicast(1, pe, &[]).unwrap()),
        Err(FabricError::RoutingLoop { .. })
    ));
}

#[test]
fn point_to_point_reaches_destination() {
    let mut m = small_machine(4, 4, 2);
    let src = PeId::new(0, 0, 0);
    let dst = PeId::new(2, 3, 1);
    for pe in [src, dst] {
        m.load(pe, Box::new(Probe::default())).unwrap();
    }
    m.inject(Packet::point_to_point(dst, 99, src, &[1, 2]).unwrap())
        .unwrap();
    m.run_until_idle().unwrap();
    let c = m.config().clone();
    let hops = hop_distance(src.chip, dst.chip, m.dims()) as u64;
    let p: &Probe = m.program(dst).unwrap();
    assert_eq!(
        p.seen,
        vec![(hops * (c.router_latency + c.link_latency) + c.router_latency, "packet_rx", 99)]
    );
}

fn dma_machine(bandwidth: u64, base: Cycles) -> Machine {
    Machine::new(MachineConfig {
        cores_per_chip: 2,
        dma_bytes_per_cycle: bandwidth,
        dma_base_latency: base,
        ..MachineConfig::default()
    })
    .unwrap()
}

#[test]
fn dma_completion_times_and_data() {
    for (len, expected) in [(0u64, 100u64), (1024, 100 + 128), (1, 101), (9, 102)] {
        let mut m = dma_machine(8, 100);
        let pe = PeId::new(0, 0, 0);
        let chip = pe.chip;
        let data: Vec<u8> = (0..len).map(|i| (i * 7) as u8).collect();
        m.dram_write(chip, 4096, &data).unwrap();
        m.load(
            pe,
            Box::new(Probe {
                sram: 2048,
                dma_on_start: Some((
                    DmaRequest {
                        src: MemRef::dram(chip, 4096),
                        dst: MemRef::sram(pe, 16),
                        len,
                    },
                    42,
                )),
                ..Probe::default()
            }),
        )
        .unwrap();
        m.boot().unwrap();
        m.run_until_idle().unwrap();
        let p: &Probe = m.program(pe).unwrap();
        assert_eq!(p.seen, vec![(expected, "dma_done", 42)], "len {len}");
        assert_eq!(m.sram_read(pe, 16, len as u32).unwrap(), data);
    }
}

#[test]
fn dma_out_of_bounds() {
    let mut m = dma_machine(8, 100);
    let pe = PeId::new(0, 0, 0);
    m.load(
        pe,
        Box::new(Probe {
            sram: 64,
            dma_on_start: Some((
                DmaRequest {
                    src: MemRef::dram(pe.chip, 0),
                    dst: MemRef::sram(pe, 32),
                    len: 64,
                },
                0,
            )),
            ..Probe::default()
        }),
    )
    .unwrap();
    assert!(matches!(m.boot(), Err(FabricError::OutOfBounds { .. })));

    let mut m = dma_machine(8, 100);
    m.load(
        pe,
        Box::new(Probe {
            sram: 64,
            dma_on_start: Some((
                DmaRequest {
                    src: MemRef::dram(pe.chip, DRAM_BYTES - 8),
                    dst: MemRef::sram(pe, 0),
                    len: 16,
                },
                0,
            )),
            ..Probe::default()
        }),
    )
    .unwrap();
    assert!(matches!(m.boot(), Err(FabricError::OutOfBounds { .. })));
}

#[test]
fn dma_and_timers_keep_global_order() {
    let mut m = dma_machine(4, 7);
    m.enable_trace();
    for c in 0..2 {
        let pe = PeId::new(0, 0, c);
        m.load(
            pe,
            Box::new(Probe {
                sram: 4096,
                timer_period: Some(5 + c as u64),
                timer_limit: 300,
                dma_on_start: Some((
                    DmaRequest {
                        src: MemRef::dram(pe.chip, 0),
                        dst: MemRef::sram(pe, 0),
                        len: 100 + 13 * c as u64,
                    },
                    c as u64,
                )),
                ..Probe::default()
            }),
        )
        .unwrap();
    }
    m.boot().unwrap();
    m.advance(300).unwrap();
    let trace = m.trace().unwrap();
    let prio = |r: &TraceRecord| {
        EventClass::ALL
            .iter()
            .position(|c| r.is(*c))
            .expect("dispatch record")
    };
    let keys: Vec<_> = trace
        .iter()
        .map(|r| (r.time, prio(r), r.chip_y, r.chip_x, r.core))
        .collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(trace.iter().filter(|r| r.is(EventClass::DmaDone)).count(), 2);
}

#[test]
fn identical_runs_produce_identical_traces() {
    let run = || {
        let mut m = small_machine(2, 2, 3);
        m.enable_trace();
        let mut t = RoutingTable::new();
        t.push(RoutingEntry::new(0, 0, LinkSet::N | LinkSet::E, [1, 2]).unwrap())
            .unwrap();
        m.set_table(ChipCoord::new(0, 0), t).unwrap();
        for chip in [(1, 0), (0, 1)] {
            let mut t = RoutingTable::new();
            t.push(RoutingEntry::new(0, 0, LinkSet::empty(), [0, 2]).unwrap())
                .unwrap();
            m.set_table(ChipCoord::new(chip.0, chip.1), t).unwrap();
        }
        for pe in [
            PeId::new(0, 0, 0),
            PeId::new(0, 0, 1),
            PeId::new(0, 0, 2),
            PeId::new(1, 0, 0),
            PeId::new(1, 0, 2),
            PeId::new(0, 1, 0),
            PeId::new(0, 1, 2),
        ] {
            m.load(
                pe,
                Box::new(Probe {
                    timer_period: if pe.core == 0 && pe.chip.x == 0 && pe.chip.y == 0 {
                        Some(17)
                    } else {
                        None
                    },
                    timer_limit: 500,
                    send_on_timer: Some(3),
                    work_per_event: 3,
                    ..Probe::default()
                }),
            )
            .unwrap();
        }
        m.boot().unwrap();
        m.advance(600).unwrap();
        trace_csv_bytes(m.trace().unwrap())
    };
    let a = run();
    assert!(a.len() > 1000);
    assert_eq!(a, run());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("time,class,chip_x,chip_y,core,key,detail\n"));
}

#[test]
fn loader_rejects_oversized_programs() {
    let mut m = small_machine(1, 1, 1);
    let pe = PeId::new(0, 0, 0);
    let err = m
        .load(
            pe,
            Box::new(Probe {
                sram: 128 * 1024 + 1,
                ..Probe::default()
            }),
        )
        .unwrap_err();
    assert!(matches!(err, FabricError::SramExceeded { .. }));
    assert!(!m.pe_state(pe).unwrap().loaded);
    m.load(
        pe,
        Box::new(Probe {
            sram: 128 * 1024,
            ..Probe::default()
        }),
    )
    .unwrap();
    let s = m.pe_state(pe).unwrap();
    assert!(s.sram_used <= s.sram_capacity);
    // Host writes cannot grow the footprint either.
    assert!(m.sram_write(pe, 128 * 1024 - 2, &[1, 2, 3]).is_err());
}

#[test]
fn half_frequency_doubles_completion_time() {
    let mut m = small_machine(1, 1, 2);
    let fast = PeId::new(0, 0, 0);
    let slow = PeId::new(0, 0, 1);
    for pe in [fast, slow] {
        m.load(
            pe,
            Box::new(Probe {
                work_per_event: 40,
                ..Probe::default()
            }),
        )
        .unwrap();
        m.post_user(pe, 100, 0, 0).unwrap();
    }
    m.set_perf_level(slow, 1).unwrap();
    assert!(m.set_perf_level(slow, 9).is_err());
    m.run_until_idle().unwrap();
    let done = |pe| {
        let p: &Probe = m.program(pe).unwrap();
        p.seen.iter().find(|s| s.1 == "done").unwrap().0 - 100
    };
    assert_eq!(done(fast), 40);
    assert_eq!(done(slow), 80);
}

#[test]
fn busy_pe_serialises_handlers() {
    let mut m = small_machine(1, 1, 1);
    let pe = PeId::new(0, 0, 0);
    m.load(
        pe,
        Box::new(Probe {
            work_per_event: 30,
            ..Probe::default()
        }),
    )
    .unwrap();
    m.post_user(pe, 10, 0, 0).unwrap();
    m.post_user(pe, 20, 1, 0).unwrap();
    m.run_until_idle().unwrap();
    let p: &Probe = m.program(pe).unwrap();
    let done: BTreeSet<Cycles> = p.seen.iter().filter(|s| s.1 == "done").map(|s| s.0).collect();
    assert_eq!(done, BTreeSet::from([40, 70]));
    let a = m.activity();
    assert_eq!(a.duration, 70);
    assert_eq!(a.pes[0].total_busy(), 60);
}
