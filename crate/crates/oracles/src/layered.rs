//! Dense layered LIF network with linearly interpolated spike times, written
//! directly from the dynamics: membrane `v ← α·v + u[t]`, spike and reset at
//! `v ≥ v_th`, crossing time `t − 1 + (v_th − p) / (v − p)` with `p` the
//! membrane carried into the tick. A spike at time `τ` emitted on tick `k`
//! lands on tick `k + 1` scaled by `α_post^(k − τ)`. Input spikes are at
//! integer times. Membranes are kept in f64.

use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug)]
pub struct Layer<'a> {
    /// Row-major `[post][pre]`.
    pub weights: &'a [f32],
    pub alpha: f64,
    pub v_th: f64,
    pub v_reset: f64,
}

/// `(tick, neuron, time)` per trained layer, in emission order.
pub fn simulate(
    sizes: &[usize],
    layers: &[Layer],
    inputs: &[(u32, u32)],
    horizon: u32,
) -> Vec<Vec<(u32, usize, f64)>> {
    // pending[l][tick][neuron]
    let mut pending: Vec<BTreeMap<u32, Vec<f64>>> = vec![BTreeMap::new(); layers.len()];
    let deliver = |pending: &mut Vec<BTreeMap<u32, Vec<f64>>>, l: usize, pre: usize, tick: u32, time: f64| {
        let n_pre = sizes[l];
        let n_post = sizes[l + 1];
        let scale = layers[l].alpha.powf(tick as f64 - time);
        let acc = pending[l].entry(tick + 1).or_insert_with(|| vec![0.0; n_post]);
        for i in 0..n_post {
            acc[i] += layers[l].weights[i * n_pre + pre] as f64 * scale;
        }
    };
    for &(t, j) in inputs {
        deliver(&mut pending, 0, j as usize, t, t as f64);
    }
    let mut v: Vec<Vec<f64>> = (0..layers.len()).map(|l| vec![0.0; sizes[l + 1]]).collect();
    let mut out = vec![Vec::new(); layers.len()];
    for t in 1..=horizon {
        for l in 0..layers.len() {
            let p = &layers[l];
            let input = pending[l].remove(&t).unwrap_or_else(|| vec![0.0; sizes[l + 1]]);
            for i in 0..sizes[l + 1] {
                let before = v[l][i];
                let now = p.alpha * before + input[i];
                if now >= p.v_th {
                    let time = t as f64 - 1.0 + ((p.v_th - before) / (now - before)).min(1.0);
                    out[l].push((t, i, time));
                    if l + 1 < layers.len() {
                        deliver(&mut pending, l + 1, i, t, time);
                    }
                    v[l][i] = p.v_reset;
                } else {
                    v[l][i] = now;
                }
            }
        }
    }
    out
}
