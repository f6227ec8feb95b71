use evfabric_eventprop::{
    accuracy, blobs, gradient_check, train_step, AdamState, FeedForwardSnn, GradCheck, Sample,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::config::{BlobSpec, Loaded, SnnNetSpec};
use crate::error::{CliError, Result};

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("eventprop: {e}"))
}

/// Latency-coded blob samples, then the network, both from `rng`.
pub fn build(data: &BlobSpec, spec: &SnnNetSpec, rng: &mut ChaCha8Rng) -> Result<(Vec<Sample>, FeedForwardSnn)> {
    data.encoder.validate().map_err(invalid)?;
    if data.samples == 0 || data.dim == 0 || !(data.sigma >= 0.0) {
        return Err(invalid("data needs samples >= 1, dim >= 1 and sigma >= 0"));
    }
    let samples = blobs(data.samples, data.dim, data.sigma, rng)
        .into_iter()
        .map(|(x, label)| Sample {
            spikes: data.encoder.encode(&x),
            label,
        })
        .collect();
    let mut sizes = vec![data.encoder.inputs(data.dim)];
    sizes.extend(&spec.hidden);
    sizes.push(2);
    let layers = sizes.len() - 1;
    if spec.init_mean.len() != layers || spec.init_std.len() != layers {
        return Err(invalid(format!("init_mean and init_std need {layers} entries")));
    }
    let mut net = FeedForwardSnn::zeros(&sizes, spec.lif, spec.horizon).map_err(invalid)?;
    for l in 0..layers {
        net.redraw_layer(l, spec.init_mean[l], spec.init_std[l], rng).map_err(invalid)?;
    }
    Ok((samples, net))
}

#[derive(Serialize)]
struct GradientCheckSummary {
    samples: usize,
    weights: usize,
    stable: usize,
    passed: usize,
    pass_rate: f64,
}

#[derive(Serialize)]
struct PacketCounts {
    /// Per layer boundary, inputs first, summed over all steps.
    forward: Vec<usize>,
    backward: Vec<usize>,
}

#[derive(Serialize)]
struct TrainingReport {
    sizes: Vec<usize>,
    steps: usize,
    batch: usize,
    initial_accuracy: f64,
    final_accuracy: f64,
    loss_curve: Vec<f64>,
    gradient_check: GradientCheckSummary,
    packets: PacketCounts,
    degenerate_crossings: usize,
    cores: usize,
    energy_total: u64,
}

pub fn run(l: &Loaded) -> Result<(Artifacts, String)> {
    let s = l.config.eventprop.as_ref().expect("checked at load");
    s.train.validate().map_err(invalid)?;
    if s.batch == 0 || s.batch > s.data.samples {
        return Err(invalid("batch must be in 1..=samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(l.config.seed);
    let (samples, mut net) = build(&s.data, &s.net, &mut rng)?;
    let model = l.cost_model()?;
    let fail = |e| CliError::runtime("eventprop", e);

    let mut check = GradCheck::default();
    for sample in samples.iter().take(s.gradcheck.samples) {
        check.merge(gradient_check(&net, sample, &s.train, &s.gradcheck.config).map_err(fail)?);
    }
    let initial_accuracy = accuracy(&net, &samples, &s.train).map_err(fail)?;
    let mut adam = AdamState::new(net.weight_count(), s.train.adam);
    let boundaries = net.layers();
    let mut packets = PacketCounts {
        forward: vec![0; boundaries],
        backward: vec![0; boundaries],
    };
    let (mut loss_curve, mut degenerate, mut energy_total, mut cores) = (Vec::new(), 0, 0, 0);
    let mut at = 0;
    for _ in 0..s.steps {
        if at + s.batch > samples.len() {
            at = 0;
        }
        let step = train_step(&mut net, &mut adam, &samples[at..at + s.batch], &s.train, &model).map_err(fail)?;
        at += s.batch;
        loss_curve.push(step.loss);
        degenerate += step.degenerate;
        energy_total += step.energy.total();
        cores = step.cores;
        for b in 0..boundaries {
            packets.forward[b] += step.forward_packets[b];
            packets.backward[b] += step.error_packets[b];
        }
    }
    let final_accuracy = accuracy(&net, &samples, &s.train).map_err(fail)?;
    let report = TrainingReport {
        sizes: net.sizes.clone(),
        steps: s.steps,
        batch: s.batch,
        initial_accuracy,
        final_accuracy,
        loss_curve,
        gradient_check: GradientCheckSummary {
            samples: s.gradcheck.samples.min(samples.len()),
            weights: check.weights,
            stable: check.stable,
            passed: check.passed,
            pass_rate: check.pass_rate(),
        },
        packets,
        degenerate_crossings: degenerate,
        cores,
        energy_total,
    };
    let mut out = Artifacts::default();
    out.json("report.json", &report)?;
    out.json("net.json", &net)?;
    out.csv(
        "loss.csv",
        &["step", "loss"],
        report.loss_curve.iter().enumerate().map(|(i, l)| [i.to_string(), l.to_string()]),
    )?;
    let summary = format!(
        "eventprop: {} steps, accuracy {:.3} -> {:.3}, gradient check {}/{} stable weights pass",
        s.steps, initial_accuracy, final_accuracy, check.passed, check.stable
    );
    Ok((out, summary))
}
