use std::collections::BTreeSet;

use evfabric_core::energy::CostModel;
use evfabric_core::MachineConfig;
use evfabric_oracles::snn as reference;
use evfabric_snn::network::{random_recurrent, synfire_chain};
use evfabric_snn::*;

fn cfg(w: u16, h: u16, cores: u16) -> MachineConfig {
    MachineConfig {
        width: w,
        height: h,
        cores_per_chip: cores,
        ..MachineConfig::default()
    }
}

fn opts(ticks: u64, max_per_vertex: Option<u32>) -> RunOptions {
    RunOptions {
        ticks,
        sram: SramCost {
            max_neurons_per_vertex: max_per_vertex,
            ..SramCost::default()
        },
        ..RunOptions::default()
    }
}

fn reference_raster(net: &Network, stim: &[(u64, u32)], ticks: u64) -> Vec<(u64, u32)> {
    let ex = net.expand().unwrap();
    let mut neurons = Vec::new();
    for p in &net.populations {
        for _ in 0..p.size {
            neurons.push(reference::Neuron {
                alpha: p.params.alpha,
                v_th: p.params.v_th,
                v_reset: p.params.v_reset,
                source: p.source,
            });
        }
    }
    let mut synapses = Vec::new();
    for p in &ex.projections {
        for s in &p.synapses {
            synapses.push(reference::Synapse {
                pre: (ex.offsets[p.pre] + s.pre) as usize,
                post: (ex.offsets[p.post] + s.post) as usize,
                weight: s.weight,
                delay: s.delay as usize,
            });
        }
    }
    let stim: Vec<(u64, usize)> = stim.iter().map(|&(t, k)| (t, k as usize)).collect();
    reference::simulate(&neurons, &synapses, &stim, ticks)
        .into_iter()
        .map(|(t, i)| (t, i as u32))
        .collect()
}

fn run(net: &Network, c: &MachineConfig, stim: &[(u64, u32)], o: &RunOptions) -> SnnRun {
    let r = run_snn(net, c, stim, o, &CostModel::default()).unwrap();
    assert_eq!(r.unknown_keys, 0);
    r
}

#[test]
fn no_stimulus_no_spikes() {
    let net = synfire_chain(4, 3, 0.5);
    let r = run(&net, &cfg(1, 1, 4), &[], &opts(20, None));
    assert!(r.raster.is_empty());
    assert_eq!(r.comm.injections.len(), 0);
}

#[test]
fn synfire_groups_fire_in_sequence() {
    let (groups, size) = (10u32, 5u32);
    let net = synfire_chain(groups, size, 0.25);
    let stim: Vec<(u64, u32)> = (0..size).map(|i| (1, i)).collect();
    let expected: Vec<(u64, u32)> = (0..groups)
        .flat_map(|g| (0..size).map(move |i| (g as u64 + 1, g * size + i)))
        .collect();
    for (machine, per_vertex) in [(cfg(1, 1, 4), None), (cfg(2, 2, 2), Some(7)), (cfg(3, 1, 8), Some(5))] {
        let r = run(&net, &machine, &stim, &opts(15, per_vertex));
        assert_eq!(r.raster, expected);
    }
    assert_eq!(reference_raster(&net, &stim, 15), expected);
}

fn noise_stimulus(neurons: u32, ticks: u64, seed: u64) -> Vec<(u64, u32)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for t in 1..=ticks {
        for k in 0..neurons {
            if rng.random::<f64>() < 0.03 {
                out.push((t, k));
            }
        }
    }
    out
}

#[test]
fn partition_invariance_random_network() {
    let net = random_recurrent(200, 0.05, 11);
    let stim = noise_stimulus(200, 60, 5);
    let want = reference_raster(&net, &stim, 60);
    assert!(want.len() > stim.len(), "network should be recurrently active");
    let one = run(&net, &cfg(1, 1, 1), &stim, &opts(60, None));
    assert_eq!(one.mapping.graph.vertices.len(), 1);
    assert_eq!(one.raster, want);
    for (machine, per_vertex) in [(cfg(1, 1, 8), Some(50)), (cfg(2, 2, 3), Some(23)), (cfg(4, 3, 1), Some(17))] {
        let r = run(&net, &machine, &stim, &opts(60, per_vertex));
        assert!(r.mapping.graph.vertices.len() >= 4);
        assert_eq!(r.raster, want);
    }
}

#[test]
fn random_placement_does_not_change_raster() {
    let net = random_recurrent(120, 0.06, 2);
    let stim = noise_stimulus(120, 40, 1);
    let want = reference_raster(&net, &stim, 40);
    for seed in 0..3 {
        let o = RunOptions {
            placement: PlacementStrategy::Random { seed },
            ..opts(40, Some(16))
        };
        assert_eq!(run(&net, &cfg(3, 3, 2), &stim, &o).raster, want);
    }
}

#[test]
fn first_spike_under_constant_drive_matches_scalar_reference() {
    // One source neuron forced every tick drives one LIF neuron with a
    // constant weight; input starts one tick after the first forced spike.
    let (alpha, v_th, drive) = (0.9f32, 2.0f32, 0.3f32);
    let net = Network {
        populations: vec![
            Population {
                name: "drive".into(),
                size: 1,
                params: LifParams::default(),
                source: true,
            },
            Population {
                name: "cell".into(),
                size: 1,
                params: LifParams {
                    alpha,
                    v_th,
                    v_reset: 0.0,
                },
                source: false,
            },
        ],
        projections: vec![Projection {
            pre: "drive".into(),
            post: "cell".into(),
            connectivity: Connectivity::AllToAll,
            weight: WeightSpec::Constant(drive),
            delay: DelaySpec::Constant(1),
        }],
    };
    let stim: Vec<(u64, u32)> = (1..=40).map(|t| (t, 0)).collect();
    let r = run(&net, &cfg(1, 1, 2), &stim, &opts(40, None));
    let first = r.raster.iter().find(|s| s.1 == 1).map(|s| s.0);
    let scalar = reference::first_spike_constant_input(alpha as f64, v_th as f64, drive as f64, 40);
    assert_eq!(scalar, Some(11));
    assert_eq!(first, scalar.map(|t| t + 1));
}

#[test]
fn delay_lands_exactly_d_ticks_later() {
    for d in 1..=5u16 {
        let net = Network {
            populations: vec![
                Population {
                    name: "a".into(),
                    size: 1,
                    params: LifParams::default(),
                    source: true,
                },
                Population {
                    name: "b".into(),
                    size: 1,
                    params: LifParams::default(),
                    source: false,
                },
            ],
            projections: vec![Projection {
                pre: "a".into(),
                post: "b".into(),
                connectivity: Connectivity::OneToOne,
                weight: WeightSpec::Constant(1.0),
                delay: DelaySpec::Constant(d),
            }],
        };
        let r = run(&net, &cfg(2, 1, 1), &[(3, 0)], &opts(12, None));
        assert_eq!(r.raster, vec![(3, 0), (3 + d as u64, 1)]);
    }
}

#[test]
fn every_spike_is_one_injection() {
    let net = random_recurrent(150, 0.05, 4);
    let stim = noise_stimulus(150, 30, 9);
    let o = RunOptions {
        trace: true,
        ..opts(30, Some(40))
    };
    let r = run(&net, &cfg(2, 2, 2), &stim, &o);
    let m = &r.mapping;
    // Every vertex of a recurrent pool has targets, so every spike is sent.
    assert!((0..m.graph.vertices.len()).all(|v| m.graph.targets(v).next().is_some()));
    let dt = o.dt;
    let mut from_injections = Vec::new();
    for inj in &r.comm.injections {
        let v = m.placement.pes.iter().position(|p| *p == inj.origin).unwrap();
        let local = m.keys.blocks[v].local(inj.key).unwrap();
        let gid = m.graph.vertices[v].lo + local;
        from_injections.push((inj.time / dt, gid));
    }
    from_injections.sort_unstable();
    assert_eq!(from_injections, r.raster);
    let tx = r.trace.unwrap().iter().filter(|t| t.class == "packet_tx").count();
    assert_eq!(tx, r.raster.len());
}

fn feedforward_sink(spikes_per_tick: u32) -> (Network, Vec<(u64, u32)>) {
    let net = Network {
        populations: vec![
            Population {
                name: "in".into(),
                size: 10,
                params: LifParams::default(),
                source: true,
            },
            Population {
                name: "out".into(),
                size: 20,
                params: LifParams {
                    alpha: 0.5,
                    v_th: 1e6,
                    v_reset: 0.0,
                },
                source: false,
            },
        ],
        projections: vec![Projection {
            pre: "in".into(),
            post: "out".into(),
            connectivity: Connectivity::AllToAll,
            weight: WeightSpec::Constant(0.1),
            delay: DelaySpec::Constant(2),
        }],
    };
    let stim = (1..=20u64)
        .flat_map(|t| (0..spikes_per_tick).map(move |k| (t, k)))
        .collect();
    (net, stim)
}

#[test]
fn synaptic_energy_is_linear_in_stimulus() {
    let model = CostModel::default();
    let (net, one) = feedforward_sink(2);
    let (_, two) = feedforward_sink(4);
    let a = run(&net, &cfg(1, 1, 3), &one, &opts(25, Some(10)));
    let b = run(&net, &cfg(1, 1, 3), &two, &opts(25, Some(10)));
    assert_eq!(
        b.energy.class_energy("synapse", &model),
        2 * a.energy.class_energy("synapse", &model)
    );
    assert!(a.energy.class_energy("synapse", &model) > 0);
}

#[test]
fn idle_level_down_saves_energy_on_bursty_activity() {
    let net = random_recurrent(100, 0.04, 8);
    // Bursts every 25 ticks, silence in between.
    let stim: Vec<(u64, u32)> = (0..4u64)
        .flat_map(|b| (0..30u32).map(move |k| (1 + 25 * b, k)))
        .collect();
    let base = opts(100, Some(25));
    let max = run(&net, &cfg(1, 1, 4), &stim, &base);
    let idle = run(
        &net,
        &cfg(1, 1, 4),
        &stim,
        &RunOptions {
            dvfs: DvfsPolicy::IdleDown,
            ..base
        },
    );
    assert_eq!(max.raster, idle.raster);
    assert!(idle.energy.total() < max.energy.total());
    let transitions: u64 = idle.activity.pes.iter().map(|p| p.level_transitions).sum();
    assert!(transitions > 0);
}

#[test]
fn vertices_fit_their_budget() {
    let net = random_recurrent(300, 0.1, 3);
    let sram = SramCost {
        budget: Some(16 * 1024),
        ..SramCost::default()
    };
    let o = RunOptions {
        sram: sram.clone(),
        ..opts(5, None)
    };
    let r = run(&net, &cfg(2, 2, 8), &[(1, 0)], &o);
    assert!(r.mapping.graph.vertices.len() > 1);
    for v in &r.mapping.graph.vertices {
        assert!(v.sram_bytes <= 16 * 1024);
    }
}

#[test]
fn too_short_ticks_are_detected() {
    let net = synfire_chain(3, 2, 1.0);
    let o = RunOptions {
        dt: 2,
        ..opts(10, Some(2))
    };
    let err = run_snn(&net, &cfg(2, 1, 2), &[(1, 0)], &o, &CostModel::default()).unwrap_err();
    assert!(err.to_string().contains("arrived after"), "{err}");
}

#[test]
fn bad_stimulus_is_rejected() {
    let net = synfire_chain(2, 2, 1.0);
    for stim in [[(0u64, 0u32)], [(1, 4)], [(11, 0)]] {
        assert!(matches!(
            run_snn(&net, &cfg(1, 1, 2), &stim, &opts(10, None), &CostModel::default()),
            Err(SnnError::Stimulus(_))
        ));
    }
}

#[test]
fn spike_csv_round_trip() {
    let spikes = vec![(1, 4), (2, 0), (2, 7)];
    let mut buf = Vec::new();
    write_spikes_csv(&spikes, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap(), "tick,key\n1,4\n2,0\n2,7\n");
    assert_eq!(read_spikes_csv(&buf[..]).unwrap(), spikes);
    let uniq: BTreeSet<_> = spikes.iter().collect();
    assert_eq!(uniq.len(), 3);
}
