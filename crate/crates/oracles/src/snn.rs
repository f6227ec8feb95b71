//! Monolithic reference simulator for discrete-time LIF networks.
//!
//! Neurons are numbered globally. Spikes emitted on tick `e` are expanded at
//! the start of tick `e + 1`, in ascending emitter order and, per emitter, in
//! ascending synapse order; each lands in the accumulator for tick `e + d`.

use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug)]
pub struct Neuron {
    pub alpha: f32,
    pub v_th: f32,
    pub v_reset: f32,
    /// Only fires when forced by the stimulus.
    pub source: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct Synapse {
    pub pre: usize,
    pub post: usize,
    pub weight: f32,
    pub delay: usize,
}

/// Returns the sorted `(tick, neuron)` raster for ticks `1..=ticks`.
pub fn simulate(
    neurons: &[Neuron],
    synapses: &[Synapse],
    stimulus: &[(u64, usize)],
    ticks: u64,
) -> Vec<(u64, usize)> {
    let n = neurons.len();
    let mut out_rows: Vec<Vec<&Synapse>> = vec![Vec::new(); n];
    for s in synapses {
        out_rows[s.pre].push(s);
    }
    let mut forced: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for &(t, i) in stimulus {
        forced.entry(t).or_default().push(i);
    }
    // Pending input keyed by absolute tick; no ring buffer.
    let mut pending: BTreeMap<u64, Vec<f32>> = BTreeMap::new();
    let mut v = vec![0.0f32; n];
    let mut last: Vec<usize> = Vec::new();
    let mut raster = Vec::new();
    for t in 1..=ticks {
        for &pre in &last {
            for s in &out_rows[pre] {
                let acc = pending
                    .entry(t - 1 + s.delay as u64)
                    .or_insert_with(|| vec![0.0; n]);
                acc[s.post] += s.weight;
            }
        }
        let input = pending.remove(&t).unwrap_or_else(|| vec![0.0; n]);
        let forced_now = forced.get(&t);
        let mut fired = Vec::new();
        for i in 0..n {
            let p = neurons[i];
            v[i] = p.alpha * v[i] + input[i];
            let is_forced = forced_now.is_some_and(|f| f.contains(&i));
            if is_forced || (!p.source && v[i] >= p.v_th) {
                v[i] = p.v_reset;
                fired.push(i);
            }
        }
        raster.extend(fired.iter().map(|&i| (t, i)));
        last = fired;
    }
    raster
}

/// Tick of the first spike of one neuron driven by constant input, by plain
/// scalar iteration in f64.
pub fn first_spike_constant_input(alpha: f64, v_th: f64, input: f64, max_ticks: u64) -> Option<u64> {
    let mut v = 0.0;
    for t in 1..=max_ticks {
        v = alpha * v + input;
        if v >= v_th {
            return Some(t);
        }
    }
    None
}
