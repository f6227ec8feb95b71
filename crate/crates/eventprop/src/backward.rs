//! Discrete adjoint of the forward pass.
//!
//! Per trained neuron and tick, with `p` the post-reset membrane of the
//! previous tick and `u[t]` the synaptic input:
//! `v[t] = α·p + u[t]`, so `λ_i[t] = ∂L/∂v[t]` and `λ_v[t − 1] = α·λ_i[t]`.
//! A spike at tick `t` resets the membrane, cutting the path through `v⁺`,
//! and its time `τ = t − 1 + (v_th − p)/(v − p)` carries `g = dL/dτ` back
//! through `∂τ/∂v = −(v_th − p)/r²` and `∂τ/∂p = −(v − v_th)/r²` with
//! `r = v − p`. Incoming spike `s` with tick `k` fed `w·α^(k − τ_s)` into
//! `u[k + 1]`, which gives the weight gradient and the error sent back to the
//! spiking neuron.

use serde::{Deserialize, Serialize};

use crate::forward::{arrival_factor, Spike, SpikeRecord};
use crate::net::FeedForwardSnn;
use evfabric_snn::LifParams;

/// Crossings with `v − p` below this skip their jump term.
pub const DEFAULT_EPS_RATE: f32 = 1e-3;

/// Running adjoint of one layer at the current tick.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointState {
    /// `∂L/∂v⁺` for the tick being left, per neuron.
    pub lambda_v: Vec<f32>,
    /// `∂L/∂u` at the tick being processed, per neuron.
    pub lambda_i: Vec<f32>,
}

impl AdjointState {
    pub fn new(neurons: usize) -> Self {
        Self {
            lambda_v: vec![0.0; neurons],
            lambda_i: vec![0.0; neurons],
        }
    }
}

/// `λ_i` for every tick of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerAdjoint {
    pub neurons: usize,
    pub horizon: u32,
    /// Row `t − 1` holds tick `t`.
    pub lambda_i: Vec<f32>,
    /// Spikes whose jump term was skipped.
    pub degenerate: usize,
}

impl LayerAdjoint {
    /// `λ_i` at tick `t`, zero past the horizon.
    pub fn at(&self, t: u32) -> Option<&[f32]> {
        (t >= 1 && t <= self.horizon)
            .then(|| &self.lambda_i[(t - 1) as usize * self.neurons..t as usize * self.neurons])
    }
}

/// Iterates one layer's adjoint from the horizon down to tick 1. `g[s]` is
/// `dL/dτ` of `spikes[s]`.
pub fn layer_adjoint(
    params: &LifParams,
    neurons: usize,
    spikes: &[Spike],
    g: &[f32],
    horizon: u32,
    eps_rate: f32,
) -> LayerAdjoint {
    let mut st = AdjointState::new(neurons);
    let mut lambda_i = vec![0.0; horizon as usize * neurons];
    let mut degenerate = 0;
    let mut at = spikes.len();
    let mut jump = vec![None; neurons];
    for t in (1..=horizon).rev() {
        while at > 0 && spikes[at - 1].tick == t {
            at -= 1;
            jump[spikes[at].neuron as usize] = Some(at);
        }
        for i in 0..neurons {
            let (dv, dp) = match jump[i].take() {
                Some(s) => {
                    let sp = &spikes[s];
                    let r = sp.rate();
                    if r < eps_rate {
                        degenerate += 1;
                        (0.0, 0.0)
                    } else {
                        let r2 = r * r;
                        (
                            -g[s] * (params.v_th - sp.v_prev) / r2,
                            -g[s] * (sp.v - params.v_th) / r2,
                        )
                    }
                }
                None => (st.lambda_v[i], 0.0),
            };
            st.lambda_i[i] = dv;
            st.lambda_v[i] = params.alpha * dv + dp;
        }
        lambda_i[(t - 1) as usize * neurons..t as usize * neurons].copy_from_slice(&st.lambda_i);
    }
    LayerAdjoint {
        neurons,
        horizon,
        lambda_i,
        degenerate,
    }
}

/// Walks `incoming` in reverse order, adding each spike's weight gradient
/// into `grad` (`[post][pre]`) and returning `(spike index, dL/dτ)` for it.
pub fn incoming_errors(
    params: &LifParams,
    weights: &[f32],
    pre: usize,
    incoming: &[Spike],
    adj: &LayerAdjoint,
    grad: &mut [f32],
) -> Vec<(usize, f32)> {
    let n = adj.neurons;
    let dfactor = -params.alpha.ln();
    let mut out = Vec::with_capacity(incoming.len());
    for (s, sp) in incoming.iter().enumerate().rev() {
        let Some(lam) = adj.at(sp.tick + 1) else {
            out.push((s, 0.0));
            continue;
        };
        let f = arrival_factor(params.alpha, sp);
        let j = sp.neuron as usize;
        let mut e = 0.0f32;
        for i in 0..n {
            grad[i * pre + j] += lam[i] * f;
            e += weights[i * pre + j] * lam[i];
        }
        out.push((s, e * f * dfactor));
    }
    out
}

/// `dL/dτ` for every spike of the last layer: only first spikes count.
pub fn output_spike_grads(record: &SpikeRecord, dl_dtau: &[f64]) -> Vec<f32> {
    let last = record.layers.last().map_or(&[][..], Vec::as_slice);
    let mut g = vec![0.0; last.len()];
    for (c, s) in record.first_spike_index(dl_dtau.len()).into_iter().enumerate() {
        if let Some(s) = s {
            g[s] = dl_dtau[c] as f32;
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Backward {
    /// Per trained layer, `[post][pre]`.
    pub grads: Vec<Vec<f32>>,
    /// Error events sent back across each layer boundary, inputs first.
    pub error_events: Vec<usize>,
    pub degenerate: usize,
}

pub fn backward(net: &FeedForwardSnn, record: &SpikeRecord, dl_dtau: &[f64], eps_rate: f32) -> Backward {
    let layers = net.layers();
    let mut grads: Vec<Vec<f32>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut error_events = vec![0; layers];
    let mut degenerate = 0;
    let mut g = output_spike_grads(record, dl_dtau);
    for l in (0..layers).rev() {
        let adj = layer_adjoint(&net.lif[l], net.sizes[l + 1], &record.layers[l + 1], &g, net.horizon, eps_rate);
        degenerate += adj.degenerate;
        let incoming = &record.layers[l];
        let errors = incoming_errors(&net.lif[l], &net.weights[l], net.sizes[l], incoming, &adj, &mut grads[l]);
        error_events[l] = errors.len();
        g = vec![0.0; incoming.len()];
        for (s, e) in errors {
            g[s] += e;
        }
    }
    Backward {
        grads,
        error_events,
        degenerate,
    }
}
