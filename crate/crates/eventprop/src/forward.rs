//! Clock-driven forward pass with interpolated spike times.
//!
//! A trained neuron follows `lif_step`: `v ← α·v + u[t]`, spike when
//! `v ≥ v_th`, then reset. The crossing time within the tick is the linear
//! interpolation `τ = t − 1 + (v_th − p) / (v − p)`, where `p` is the
//! post-reset membrane left by tick `t − 1`. Spikes store the offset
//! `τ − (t − 1)` in `(0, 1]` rather than `τ`, which keeps full f32 precision
//! late in the run. A spike with tick `k` and time `τ` reaches the next layer
//! at tick `k + 1` with weight `w · α^(k − τ)`, the decay it would have seen
//! between `τ + 1` and the tick boundary. For integer times this is exactly
//! `w`.

use evfabric_snn::{lif_step, LifParams, LifState};
use serde::{Deserialize, Serialize};

use crate::error::{EventpropError, Result};
use crate::net::FeedForwardSnn;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub tick: u32,
    pub neuron: u32,
    /// Crossing time minus `tick − 1`, in `(0, 1]`; 1 for inputs.
    pub offset: f32,
    /// Membrane before the tick (post-reset) and at the crossing
    /// (pre-reset). Zero for inputs.
    pub v_prev: f32,
    pub v: f32,
}

impl Spike {
    pub fn input(tick: u32, neuron: u32) -> Self {
        Self {
            tick,
            neuron,
            offset: 1.0,
            v_prev: 0.0,
            v: 0.0,
        }
    }

    /// Interpolated crossing time.
    pub fn time(&self) -> f64 {
        (self.tick - 1) as f64 + self.offset as f64
    }

    /// Membrane change across the crossing tick.
    pub fn rate(&self) -> f32 {
        self.v - self.v_prev
    }
}

/// Spikes per layer (inputs first), each ordered by tick then neuron, with
/// the crossing snapshot the backward pass needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub layers: Vec<Vec<Spike>>,
}

impl SpikeRecord {
    pub fn counts(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    /// `(tick, neuron)` pairs per layer.
    pub fn raster(&self) -> Vec<Vec<(u32, u32)>> {
        self.layers
            .iter()
            .map(|l| l.iter().map(|s| (s.tick, s.neuron)).collect())
            .collect()
    }

    /// Interpolated first-spike time of each output neuron, `t_max` if
    /// silent.
    pub fn first_spike_times(&self, outputs: usize, t_max: f64) -> Vec<f64> {
        let mut tau = vec![t_max; outputs];
        let mut seen = vec![false; outputs];
        for s in self.layers.last().into_iter().flatten() {
            let i = s.neuron as usize;
            if !seen[i] {
                seen[i] = true;
                tau[i] = s.time();
            }
        }
        tau
    }

    /// Index of each output neuron's first spike in the last layer.
    pub fn first_spike_index(&self, outputs: usize) -> Vec<Option<usize>> {
        let mut first = vec![None; outputs];
        for (at, s) in self.layers.last().into_iter().flatten().enumerate() {
            first[s.neuron as usize].get_or_insert(at);
        }
        first
    }
}

/// Incoming weight scale for a spike: `α^(tick − time)`.
#[inline]
pub fn arrival_factor(alpha: f32, s: &Spike) -> f32 {
    if s.offset == 1.0 {
        1.0
    } else {
        alpha.powf(1.0 - s.offset)
    }
}

/// One trained layer's neurons, as run on a layer core.
#[derive(Clone, Debug)]
pub struct LayerSim {
    pub params: LifParams,
    pub pre: usize,
    state: LifState,
}

impl LayerSim {
    pub fn new(params: LifParams, pre: usize, neurons: usize) -> Self {
        Self {
            params,
            pre,
            state: LifState::new(neurons, 2),
        }
    }

    /// Adds one incoming spike into the tick after it was emitted, post
    /// neurons in ascending order.
    pub fn receive(&mut self, weights: &[f32], s: &Spike) -> u64 {
        let n = self.state.len();
        let f = arrival_factor(self.params.alpha, s);
        let slot = ((s.tick + 1) % 2) as usize;
        let j = s.neuron as usize;
        for i in 0..n {
            self.state.buffer[slot * n + i] += weights[i * self.pre + j] * f;
        }
        n as u64
    }

    pub fn step(&mut self, t: u32) -> Vec<Spike> {
        let n = self.state.len();
        let slot = (t % 2) as usize;
        let before = self.state.v.clone();
        let input: Vec<f32> = self.state.buffer[slot * n..(slot + 1) * n].to_vec();
        let fired = lif_step(&mut self.state, &self.params, false, &[], t as u64);
        let th = self.params.v_th;
        fired
            .into_iter()
            .map(|i| {
                let p = before[i as usize];
                // Same expression lif_step evaluated, so v >= v_th holds.
                let v = self.params.alpha * p + input[i as usize];
                Spike {
                    tick: t,
                    neuron: i,
                    offset: ((th - p) / (v - p)).min(1.0),
                    v_prev: p,
                    v,
                }
            })
            .collect()
    }
}

/// Input spikes for a sample: sorted, in range, one per input neuron at most.
pub fn input_spikes(net: &FeedForwardSnn, input: &[(u32, u32)]) -> Result<Vec<Spike>> {
    let mut spikes: Vec<Spike> = input.iter().map(|&(t, i)| Spike::input(t, i)).collect();
    spikes.sort_by_key(|s| (s.tick, s.neuron));
    for w in spikes.windows(2) {
        if (w[0].tick, w[0].neuron) == (w[1].tick, w[1].neuron) {
            return Err(EventpropError::InvalidInput(format!(
                "duplicate input spike ({}, {})",
                w[0].tick, w[0].neuron
            )));
        }
    }
    if let Some(s) = spikes
        .iter()
        .find(|s| s.neuron as usize >= net.sizes[0] || s.tick == 0 || s.tick > net.horizon)
    {
        return Err(EventpropError::InvalidInput(format!(
            "input spike ({}, {}) outside {} neurons × ticks 1..={}",
            s.tick, s.neuron, net.sizes[0], net.horizon
        )));
    }
    Ok(spikes)
}

/// Whole-network forward pass on one thread, layer by layer each tick.
pub fn forward(net: &FeedForwardSnn, input: &[(u32, u32)]) -> Result<SpikeRecord> {
    net.validate()?;
    let inputs = input_spikes(net, input)?;
    let mut sims: Vec<LayerSim> = (0..net.layers())
        .map(|l| LayerSim::new(net.lif[l], net.sizes[l], net.sizes[l + 1]))
        .collect();
    let mut record = SpikeRecord {
        layers: vec![Vec::new(); net.sizes.len()],
    };
    let mut next_input = 0;
    for t in 1..=net.horizon {
        let start = next_input;
        while next_input < inputs.len() && inputs[next_input].tick == t {
            next_input += 1;
        }
        record.layers[0].extend_from_slice(&inputs[start..next_input]);
        for s in &inputs[start..next_input] {
            sims[0].receive(&net.weights[0], s);
        }
        for l in 0..net.layers() {
            let fired = sims[l].step(t);
            if let Some(next) = sims.get_mut(l + 1) {
                for s in &fired {
                    next.receive(&net.weights[l + 1], s);
                }
            }
            record.layers[l + 1].extend(fired);
        }
    }
    Ok(record)
}
