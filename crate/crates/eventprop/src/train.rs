//! Single-thread reference path: per-sample gradients and their batch sum.

use serde::{Deserialize, Serialize};

use crate::adam::AdamHyper;
use crate::backward::{backward, DEFAULT_EPS_RATE};
use crate::error::{EventpropError, Result};
use crate::forward::{forward, SpikeRecord};
use crate::loss::{predict, ttfs_loss};
use crate::net::FeedForwardSnn;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventpropConfig {
    /// Logit scale of the loss; defaults to `horizon / 4`.
    pub tau_scale: Option<f64>,
    /// First-spike time of a silent output; defaults to `horizon`.
    pub t_max: Option<f64>,
    pub eps_rate: f32,
    pub adam: AdamHyper,
    /// Cycles per simulated tick on the fabric.
    pub dt: u64,
}

impl Default for EventpropConfig {
    fn default() -> Self {
        Self {
            tau_scale: None,
            t_max: None,
            eps_rate: DEFAULT_EPS_RATE,
            adam: AdamHyper::default(),
            dt: 10_000,
        }
    }
}

impl EventpropConfig {
    pub fn tau_scale(&self, net: &FeedForwardSnn) -> f64 {
        self.tau_scale.unwrap_or(net.horizon as f64 / 4.0)
    }

    pub fn t_max(&self, net: &FeedForwardSnn) -> f64 {
        self.t_max.unwrap_or(net.horizon as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EventpropError::InvalidConfig(m.into()));
        if self.tau_scale.is_some_and(|s| !(s > 0.0)) {
            return bad("tau_scale must be > 0");
        }
        if !(self.eps_rate >= 0.0) {
            return bad("eps_rate must be >= 0");
        }
        let a = &self.adam;
        if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad("adam needs lr > 0, betas in [0, 1) and eps > 0");
        }
        if self.dt == 0 {
            return bad("dt must be >= 1");
        }
        Ok(())
    }
}

/// Latency-coded input spikes `(tick, neuron)` and a class label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub spikes: Vec<(u32, u32)>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleResult {
    pub loss: f64,
    pub correct: bool,
    pub tau: Vec<f64>,
    pub record: SpikeRecord,
    pub grads: Vec<Vec<f32>>,
    pub error_events: Vec<usize>,
    pub degenerate: usize,
}

/// Forward pass, loss and first-spike times.
pub fn evaluate(net: &FeedForwardSnn, sample: &Sample, cfg: &EventpropConfig) -> Result<(f64, Vec<f64>, SpikeRecord)> {
    let outputs = *net.sizes.last().expect("validated");
    if sample.label >= outputs {
        return Err(EventpropError::InvalidInput(format!("label {} with {outputs} outputs", sample.label)));
    }
    let record = forward(net, &sample.spikes)?;
    let tau = record.first_spike_times(outputs, cfg.t_max(net));
    let (loss, _) = ttfs_loss(&tau, sample.label, cfg.tau_scale(net));
    Ok((loss, tau, record))
}

pub fn sample_gradients(net: &FeedForwardSnn, sample: &Sample, cfg: &EventpropConfig) -> Result<SampleResult> {
    let (_, tau, record) = evaluate(net, sample, cfg)?;
    let (loss, dl) = ttfs_loss(&tau, sample.label, cfg.tau_scale(net));
    let b = backward(net, &record, &dl, cfg.eps_rate);
    Ok(SampleResult {
        loss,
        correct: predict(&tau) == sample.label,
        tau,
        record,
        grads: b.grads,
        error_events: b.error_events,
        degenerate: b.degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    /// Summed over the batch, in sample order, flattened over layers.
    pub grads: Vec<f32>,
    pub loss: f64,
    pub correct: usize,
    pub degenerate: usize,
    /// Forward spikes and backward error events per layer boundary, summed
    /// over the batch.
    pub forward_packets: Vec<usize>,
    pub error_events: Vec<usize>,
}

pub fn batch_gradients(net: &FeedForwardSnn, batch: &[Sample], cfg: &EventpropConfig) -> Result<BatchResult> {
    let mut out = BatchResult {
        grads: vec![0.0; net.weight_count()],
        loss: 0.0,
        correct: 0,
        degenerate: 0,
        forward_packets: vec![0; net.layers()],
        error_events: vec![0; net.layers()],
    };
    for s in batch {
        let r = sample_gradients(net, s, cfg)?;
        for (acc, g) in out.grads.iter_mut().zip(r.grads.iter().flatten()) {
            *acc += g;
        }
        out.loss += r.loss;
        out.correct += r.correct as usize;
        out.degenerate += r.degenerate;
        for l in 0..net.layers() {
            out.forward_packets[l] += r.record.layers[l].len();
            out.error_events[l] += r.error_events[l];
        }
    }
    Ok(out)
}

/// Classification accuracy by earliest output.
pub fn accuracy(net: &FeedForwardSnn, data: &[Sample], cfg: &EventpropConfig) -> Result<f64> {
    let mut hits = 0;
    for s in data {
        let (_, tau, _) = evaluate(net, s, cfg)?;
        hits += (predict(&tau) == s.label) as usize;
    }
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// Splits a flat weight vector back into layers.
pub fn unflatten(net: &FeedForwardSnn, flat: &[f32]) -> Vec<Vec<f32>> {
    let mut at = 0;
    net.weights
        .iter()
        .map(|w| {
            let v = flat[at..at + w.len()].to_vec();
            at += w.len();
            v
        })
        .collect()
}
