use evfabric_core::{batch_sweep, CostModel};
use evfabric_eventprop::event::{spike_payload, SPIKE_BYTES};
use evfabric_eventprop::*;
use evfabric_oracles::{layered, loss as loss_oracle, snn};
use evfabric_snn::LifParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LIF: LifParams = LifParams {
    alpha: 0.9,
    v_th: 1.0,
    v_reset: 0.0,
};

fn random_input<R: Rng>(inputs: usize, rng: &mut R) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for i in 0..inputs as u32 {
        if rng.random_bool(0.8) {
            out.push((rng.random_range(1..=10), i));
        }
    }
    out
}

fn random_sample<R: Rng>(net: &FeedForwardSnn, rng: &mut R) -> Sample {
    Sample {
        spikes: random_input(net.sizes[0], rng),
        label: rng.random_range(0..*net.sizes.last().unwrap()),
    }
}

#[test]
fn zero_weights_are_silent() {
    let net = FeedForwardSnn::zeros(&[3, 4, 2], LIF, 20).unwrap();
    let cfg = EventpropConfig::default();
    let sample = Sample {
        spikes: vec![(1, 0), (2, 1), (3, 2)],
        label: 1,
    };
    let (loss, tau, record) = evaluate(&net, &sample, &cfg).unwrap();
    assert_eq!(record.counts(), vec![3, 0, 0]);
    assert_eq!(tau, vec![20.0, 20.0]);
    assert!((loss - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn strong_synapse_fires_one_tick_later() {
    let mut net = FeedForwardSnn::zeros(&[1, 1], LIF, 10).unwrap();
    net.weights[0][0] = 1.5;
    let record = forward(&net, &[(4, 0)]).unwrap();
    assert_eq!(record.raster()[1], vec![(5, 0)]);
    // Crossing interpolated from 0 to 1.5.
    assert!((record.layers[1][0].time() - (4.0 + 1.0 / 1.5)).abs() < 1e-6);
}

#[test]
fn two_two_two_matches_layered_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..50 {
        let net = FeedForwardSnn::random(&[2, 2, 2], LIF, 30, 4.0, 1.5, &mut rng).unwrap();
        let input = random_input(2, &mut rng);
        let record = forward(&net, &input).unwrap();
        let layers: Vec<layered::Layer> = (0..2)
            .map(|l| layered::Layer {
                weights: &net.weights[l],
                alpha: LIF.alpha as f64,
                v_th: LIF.v_th as f64,
                v_reset: LIF.v_reset as f64,
            })
            .collect();
        let want = layered::simulate(&net.sizes, &layers, &input, net.horizon);
        for l in 0..2 {
            let got = &record.layers[l + 1];
            assert_eq!(got.len(), want[l].len());
            for (s, &(t, i, time)) in got.iter().zip(&want[l]) {
                assert_eq!((s.tick, s.neuron as usize), (t, i));
                assert!((s.time() - time).abs() < 1e-4, "{} vs {time}", s.time());
            }
        }
        checked += record.layers[2].len();
    }
    assert!(checked > 20, "too few output spikes to compare: {checked}");
}

#[test]
fn no_leak_matches_plain_lif_simulator() {
    let lif = LifParams { alpha: 1.0, ..LIF };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let net = FeedForwardSnn::random(&[3, 4, 2], lif, 25, 2.0, 1.5, &mut rng).unwrap();
        let input = random_input(3, &mut rng);
        let neuron = |source| snn::Neuron {
            alpha: 1.0,
            v_th: 1.0,
            v_reset: 0.0,
            source,
        };
        let neurons: Vec<snn::Neuron> = (0..9).map(|g| neuron(g < 3)).collect();
        let offsets = [0, 3, 7];
        let mut synapses = Vec::new();
        for l in 0..2 {
            for i in 0..net.sizes[l + 1] {
                for j in 0..net.sizes[l] {
                    synapses.push(snn::Synapse {
                        pre: offsets[l] + j,
                        post: offsets[l + 1] + i,
                        weight: net.weights[l][i * net.sizes[l] + j],
                        delay: 1,
                    });
                }
            }
        }
        let stimulus: Vec<(u64, usize)> = input.iter().map(|&(t, i)| (t as u64, i as usize)).collect();
        let want = snn::simulate(&neurons, &synapses, &stimulus, 25);
        let record = forward(&net, &input).unwrap();
        let mut got: Vec<(u64, usize)> = record
            .raster()
            .iter()
            .enumerate()
            .flat_map(|(l, r)| r.iter().map(move |&(t, i)| (t as u64, offsets[l] + i as usize)))
            .collect();
        got.sort();
        assert_eq!(got, want);
    }
}

#[test]
fn fabric_records_equal_monolithic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = FeedForwardSnn::random(&[4, 6, 3], LIF, 30, 3.0, 1.0, &mut rng).unwrap();
    let batch: Vec<Sample> = (0..3).map(|_| random_sample(&net, &mut rng)).collect();
    let records = records_on_fabric(&net, &batch, &EventpropConfig::default()).unwrap();
    for (s, r) in batch.iter().zip(&records) {
        assert_eq!(r, &forward(&net, &s.spikes).unwrap());
    }
}

#[test]
fn ttfs_loss_limits() {
    let (l, g) = ttfs_loss(&[5.0; 4], 2, 3.0);
    assert!((l - 4f64.ln()).abs() < 1e-12);
    assert!((g.iter().sum::<f64>()).abs() < 1e-12);
    let mut last = f64::INFINITY;
    for gap in [1.0, 5.0, 20.0, 80.0] {
        let (l, _) = ttfs_loss(&[1.0, 1.0 + gap], 0, 2.0);
        assert!(l < last);
        last = l;
    }
    assert!(last < 1e-15);
}

proptest! {
    #[test]
    fn ttfs_loss_matches_scalar_oracle(tau in prop::collection::vec(0.0f64..30.0, 4), label in 0usize..4, scale in 0.5f64..10.0) {
        let (l, g) = ttfs_loss(&tau, label, scale);
        prop_assert!((l - loss_oracle::ttfs_cross_entropy(&tau, label, scale)).abs() < 1e-9);
        for c in 0..4 {
            let fd = evfabric_oracles::fd::central_diff(
                |t| loss_oracle::ttfs_cross_entropy(t, label, scale),
                &tau,
                c,
                1e-5,
            );
            prop_assert!(evfabric_oracles::fd::close(g[c], fd, 1e-5, 1e-8));
        }
    }

    #[test]
    fn error_event_round_trips(tick: u32, key: u32, value: f32) {
        let e = ErrorEvent { tick, key, value };
        let bytes = e.to_bytes();
        prop_assert!(bytes.len() <= evfabric_core::MAX_PAYLOAD_BYTES);
        let back = ErrorEvent::from_bytes(&bytes).unwrap();
        prop_assert_eq!((back.tick, back.key, back.value.to_bits()), (tick, key, value.to_bits()));
    }
}

#[test]
fn payloads_fit_a_packet() {
    assert!(ERROR_EVENT_BYTES <= evfabric_core::MAX_PAYLOAD_BYTES);
    assert_eq!(spike_payload(3, 0.5).len(), SPIKE_BYTES);
    assert!(ErrorEvent::from_bytes(&[0; 11]).is_none());
}

#[test]
fn zero_loss_gradient_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = FeedForwardSnn::random(&[4, 5, 3], LIF, 30, 4.0, 1.0, &mut rng).unwrap();
    let record = forward(&net, &random_input(4, &mut rng)).unwrap();
    let b = backward(&net, &record, &[0.0; 3], DEFAULT_EPS_RATE);
    assert!(b.grads.iter().flatten().all(|&g| g == 0.0));
}

#[test]
fn two_three_two_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let cfg = EventpropConfig::default();
    let mut total = GradCheck::default();
    for _ in 0..10 {
        let net = FeedForwardSnn::random(&[2, 3, 2], LIF, 30, 3.0, 1.0, &mut rng).unwrap();
        let sample = random_sample(&net, &mut rng);
        total.merge(gradient_check(&net, &sample, &cfg, &GradCheckConfig::default()).unwrap());
    }
    assert!(total.stable >= 50, "{total:?}");
    assert!(total.pass_rate() >= 0.95, "{total:?}");
}

#[test]
fn backward_packets_mirror_forward_packets() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let net = FeedForwardSnn::random(&[4, 8, 6, 3], LIF, 30, 3.0, 1.0, &mut rng).unwrap();
    let batch: Vec<Sample> = (0..4).map(|_| random_sample(&net, &mut rng)).collect();
    let cfg = EventpropConfig::default();
    let report = gradients_on_fabric(&net, &batch, &cfg, &CostModel::default()).unwrap();
    assert_eq!(report.forward_packets, report.error_packets);
    assert!(report.forward_packets.iter().all(|&n| n > 0), "{:?}", report.forward_packets);
    let mono = batch_gradients(&net, &batch, &cfg).unwrap();
    assert_eq!(mono.error_events, mono.forward_packets);
    assert_eq!(report.forward_packets, mono.forward_packets);
}

#[test]
fn first_adam_step_is_lr() {
    let hyper = AdamHyper { lr: 0.01, ..Default::default() };
    let mut adam = AdamState::new(4, hyper);
    let mut w = [0.0f32, 1.0, -1.0, 2.0];
    let before = w;
    adam.apply(&mut w, &[1e-3, -5.0, 250.0, -1e-4]);
    for (a, b) in w.iter().zip(before) {
        assert!(((a - b).abs() - 0.01).abs() < 1e-4);
    }
    assert_eq!(adam.step, 1);
}

#[test]
fn identical_batch_scales_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let net = FeedForwardSnn::random(&[4, 5, 2], LIF, 30, 3.0, 1.0, &mut rng).unwrap();
    let cfg = EventpropConfig::default();
    let sample = random_sample(&net, &mut rng);
    let single = sample_gradients(&net, &sample, &cfg).unwrap();
    let batch = vec![sample; 5];
    let report = gradients_on_fabric(&net, &batch, &cfg, &CostModel::default()).unwrap();
    for (g, s) in report.grads.iter().zip(single.grads.iter().flatten()) {
        assert!((g - 5.0 * s).abs() <= 1e-6 * (1.0 + s.abs()), "{g} vs 5 × {s}");
    }
}

#[test]
fn fabric_gradients_equal_sequential_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let net = FeedForwardSnn::random(&[4, 6, 3], LIF, 30, 3.0, 1.0, &mut rng).unwrap();
    let cfg = EventpropConfig::default();
    let batch: Vec<Sample> = (0..6).map(|_| random_sample(&net, &mut rng)).collect();
    let report = gradients_on_fabric(&net, &batch, &cfg, &CostModel::default()).unwrap();
    let mono = batch_gradients(&net, &batch, &cfg).unwrap();
    let bits = |g: &[f32]| g.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&report.grads), bits(&mono.grads));
    assert_eq!(report.correct, mono.correct);
    assert!((report.loss - mono.loss / 6.0).abs() < 1e-12);
}

#[test]
fn train_step_applies_adam_to_summed_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let net = FeedForwardSnn::random(&[4, 6, 3], LIF, 30, 3.0, 1.0, &mut rng).unwrap();
    let cfg = EventpropConfig::default();
    let model = CostModel::default();
    let mut fabric_net = net.clone();
    let mut fabric_adam = AdamState::new(net.weight_count(), cfg.adam);
    let mut ref_net = net.clone();
    let mut ref_adam = fabric_adam.clone();
    for _ in 0..3 {
        let batch: Vec<Sample> = (0..4).map(|_| random_sample(&net, &mut rng)).collect();
        train_step(&mut fabric_net, &mut fabric_adam, &batch, &cfg, &model).unwrap();
        let g = batch_gradients(&ref_net, &batch, &cfg).unwrap().grads;
        let mut flat: Vec<f32> = ref_net.weights.iter().flatten().copied().collect();
        ref_adam.apply(&mut flat, &g);
        ref_net.weights = evfabric_eventprop::train::unflatten(&ref_net, &flat);
    }
    assert_eq!(fabric_net, ref_net);
    assert_eq!(fabric_adam, ref_adam);
}

#[test]
fn train_step_rejects_mismatched_optimiser() {
    let mut net = FeedForwardSnn::zeros(&[2, 2], LIF, 5).unwrap();
    let mut adam = AdamState::new(3, AdamHyper::default());
    let batch = [Sample { spikes: vec![(1, 0)], label: 0 }];
    let err = train_step(&mut net, &mut adam, &batch, &EventpropConfig::default(), &CostModel::default());
    assert!(matches!(err, Err(EventpropError::InvalidConfig(_))));
}

#[test]
fn bad_inputs_are_rejected() {
    let net = FeedForwardSnn::zeros(&[2, 2], LIF, 5).unwrap();
    assert!(forward(&net, &[(0, 0)]).is_err());
    assert!(forward(&net, &[(6, 0)]).is_err());
    assert!(forward(&net, &[(1, 2)]).is_err());
    assert!(forward(&net, &[(1, 0), (1, 0)]).is_err());
    let cfg = EventpropConfig::default();
    assert!(evaluate(&net, &Sample { spikes: vec![], label: 2 }, &cfg).is_err());
}

#[test]
fn sweep_energy_per_timestep_is_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let net = FeedForwardSnn::random(&[4, 6, 2], LIF, 30, 3.0, 1.0, &mut rng).unwrap();
    let sample = random_sample(&net, &mut rng);
    let workload = GradientWorkload {
        net,
        samples: vec![sample; 8],
        cfg: EventpropConfig::default(),
    };
    let points = batch_sweep(&workload, &[1, 2, 4, 8], &CostModel::default()).unwrap();
    let base = points[0].energy_per_timestep;
    for p in &points {
        assert!((p.energy_per_timestep / base - 1.0).abs() < 0.01, "{points:?}");
    }
}

#[test]
fn blob_sanity_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let enc = LatencyEncoder::default();
    let data: Vec<Sample> = blobs(400, 2, 0.5, &mut rng)
        .into_iter()
        .map(|(x, label)| Sample {
            spikes: enc.encode(&x),
            label,
        })
        .collect();
    let mut net = FeedForwardSnn::random(&[enc.inputs(2), 40, 2], LIF, 30, 2.0, 1.0, &mut rng).unwrap();
    net.redraw_layer(1, 12.0, 1.0, &mut rng).unwrap();
    let cfg = EventpropConfig {
        tau_scale: Some(2.0),
        adam: AdamHyper {
            lr: 0.01,
            eps: 1.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let hidden_before = net.weights[0].clone();
    let mut adam = AdamState::new(net.weight_count(), cfg.adam);
    let model = CostModel::default();
    for step in 0..200 {
        let at = (step * 16) % data.len();
        train_step(&mut net, &mut adam, &data[at..at + 16], &cfg, &model).unwrap();
    }
    let acc = accuracy(&net, &data, &cfg).unwrap();
    assert!(acc >= 0.95, "train accuracy {acc}");
    assert_ne!(net.weights[0], hidden_before, "hidden layer never updated");
}
