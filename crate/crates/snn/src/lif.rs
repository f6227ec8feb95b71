//! Discrete-time LIF neurons with a delay ring buffer, and synaptic rows.

use serde::{Deserialize, Serialize};

use crate::mapping::KeyBlock;
use crate::network::LifParams;

#[derive(Clone, Debug, PartialEq)]
pub struct LifState {
    pub v: Vec<f32>,
    /// `slots × neurons` input accumulators; slot `t mod slots` feeds tick `t`.
    pub buffer: Vec<f32>,
    pub slots: usize,
}

impl LifState {
    pub fn new(neurons: usize, slots: usize) -> Self {
        assert!(slots >= 2, "ring buffer needs at least two slots");
        Self {
            v: vec![0.0; neurons],
            buffer: vec![0.0; neurons * slots],
            slots,
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    fn slot(&mut self, tick: u64) -> &mut [f32] {
        let n = self.v.len();
        let s = (tick % self.slots as u64) as usize;
        &mut self.buffer[s * n..(s + 1) * n]
    }
}

/// Advances every neuron by one tick: `v ← alpha·v + input[t]`, clears the
/// slot, fires on `v ≥ v_th` (or when `forced`, sorted ascending) and resets.
/// Source neurons fire only when forced. Returns local indices in ascending
/// order.
pub fn lif_step(state: &mut LifState, params: &LifParams, source: bool, forced: &[u32], t: u64) -> Vec<u32> {
    let n = state.v.len();
    let s = (t % state.slots as u64) as usize;
    let mut spikes = Vec::new();
    let mut f = forced.iter().peekable();
    for i in 0..n {
        let input = std::mem::take(&mut state.buffer[s * n + i]);
        let v = params.alpha * state.v[i] + input;
        let mut is_forced = false;
        while let Some(&&j) = f.peek() {
            if j as usize > i {
                break;
            }
            is_forced |= j as usize == i;
            f.next();
        }
        if is_forced || (!source && v >= params.v_th) {
            state.v[i] = params.v_reset;
            spikes.push(i as u32);
        } else {
            state.v[i] = v;
        }
    }
    spikes
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynapseWord {
    pub post: u32,
    pub weight: f32,
    pub delay: u16,
}

/// Adds one spike emitted on tick `t` through `row`, in row order.
pub fn process_spike(state: &mut LifState, row: &[SynapseWord], t: u64) {
    for s in row {
        state.slot(t + s.delay as u64)[s.post as usize] += s.weight;
    }
}

/// Incoming synapses of one vertex from one source vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceRows {
    pub key: KeyBlock,
    /// Global id of the source vertex's first neuron.
    pub gid_lo: u32,
    /// One row per source neuron, sorted by `(post, synapse index)`.
    pub rows: Vec<Vec<SynapseWord>>,
}

/// All incoming rows of a vertex, searchable by routing key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynapseRows {
    /// Sorted by key base.
    pub sources: Vec<SourceRows>,
}

impl SynapseRows {
    /// `(source block index, local pre index)` for a key.
    pub fn lookup(&self, key: u32) -> Option<(usize, u32)> {
        let at = self.sources.partition_point(|s| s.key.base <= key);
        let b = at.checked_sub(1)?;
        let local = self.sources[b].key.local(key)?;
        ((local as usize) < self.sources[b].rows.len()).then_some((b, local))
    }

    pub fn row(&self, block: usize, local: u32) -> &[SynapseWord] {
        &self.sources[block].rows[local as usize]
    }

    pub fn synapse_count(&self) -> usize {
        self.sources.iter().flat_map(|s| &s.rows).map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: LifParams = LifParams {
        alpha: 0.9,
        v_th: 10.0,
        v_reset: 0.0,
    };

    #[test]
    fn decays_without_input() {
        let mut s = LifState::new(1, 2);
        s.v[0] = 1.0;
        assert!(lif_step(&mut s, &P, false, &[], 1).is_empty());
        assert_eq!(s.v[0], 0.9);
    }

    #[test]
    fn threshold_equality_spikes() {
        let p = LifParams { alpha: 1.0, ..P };
        let mut s = LifState::new(1, 2);
        s.v[0] = 9.5;
        process_spike(&mut s, &[SynapseWord { post: 0, weight: 0.5, delay: 1 }], 0);
        assert_eq!(lif_step(&mut s, &p, false, &[], 1), vec![0]);
        assert_eq!(s.v[0], 0.0);
    }

    #[test]
    fn zero_weight_changes_nothing() {
        let mut s = LifState::new(3, 4);
        let before = s.clone();
        process_spike(&mut s, &[SynapseWord { post: 1, weight: 0.0, delay: 2 }], 5);
        assert_eq!(s, before);
    }

    #[test]
    fn same_slot_contributions_sum() {
        let mut s = LifState::new(2, 3);
        let row = [SynapseWord { post: 1, weight: 0.25, delay: 2 }];
        process_spike(&mut s, &row, 0);
        process_spike(&mut s, &row, 0);
        assert_eq!(s.buffer[2 * 2 + 1], 0.5);
    }

    #[test]
    fn forced_and_source_neurons() {
        let mut s = LifState::new(4, 2);
        s.buffer[4..].fill(100.0);
        assert_eq!(lif_step(&mut s, &P, true, &[2], 1), vec![2]);
        assert_eq!(s.v, vec![100.0, 100.0, 0.0, 100.0]);
        s.buffer[..4].fill(0.0);
        // Neuron 2 was reset, so only the others cross.
        assert_eq!(lif_step(&mut s, &P, false, &[0, 3], 2), vec![0, 1, 3]);
    }
}
