//! Sparse layers: a fixed-size list of active connections, each a
//! `(pre, post)` pair with a fixed sign and a positive amplitude, so the
//! effective weight is `sign · θ`. Every other pair is dormant (weight 0).

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RewireError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub pre: Vec<u32>,
    pub post: Vec<u32>,
    pub sign: Vec<i8>,
    pub theta: Vec<f32>,
    pub bias: Vec<f32>,
    /// Occupancy of every `(post, pre)` pair, row-major over `post`.
    occupied: Vec<u64>,
}

impl SparseLayer {
    /// `k` distinct pairs drawn uniformly, random signs and amplitudes
    /// `|N(0, 1)| · sqrt(2 / fan_in)` with `fan_in = k / outputs`.
    pub fn random<R: Rng>(inputs: usize, outputs: usize, k: usize, rng: &mut R) -> Result<Self> {
        let total = inputs * outputs;
        if k > total {
            return Err(RewireError::PoolExhausted {
                layer: 0,
                needed: k,
                dormant: total,
            });
        }
        let mut picks = index::sample(rng, total, k).into_vec();
        picks.sort_unstable();
        let fan_in = (k as f32 / outputs as f32).max(1.0);
        let scale = (2.0 / fan_in).sqrt();
        let mut layer = Self::empty(inputs, outputs);
        for p in picks {
            let sign = if rng.random::<bool>() { 1 } else { -1 };
            let z: f32 = StandardNormal.sample(rng);
            layer.push((p % inputs) as u32, (p / inputs) as u32, sign, z.abs() * scale + f32::MIN_POSITIVE);
        }
        Ok(layer)
    }

    pub fn empty(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            pre: Vec::new(),
            post: Vec::new(),
            sign: Vec::new(),
            theta: Vec::new(),
            bias: vec![0.0; outputs],
            occupied: vec![0; (inputs * outputs).div_ceil(64)],
        }
    }

    /// Appends an active connection; panics on a duplicate pair.
    pub fn push(&mut self, pre: u32, post: u32, sign: i8, theta: f32) {
        let slot = self.pair(pre, post);
        assert!(!self.is_active(slot), "duplicate connection ({pre}, {post})");
        self.set_occupied(slot, true);
        self.pre.push(pre);
        self.post.push(post);
        self.sign.push(sign);
        self.theta.push(theta);
    }

    pub fn k(&self) -> usize {
        self.pre.len()
    }

    pub fn dense_size(&self) -> usize {
        self.inputs * self.outputs
    }

    fn pair(&self, pre: u32, post: u32) -> usize {
        post as usize * self.inputs + pre as usize
    }

    pub(crate) fn is_active(&self, pair: usize) -> bool {
        self.occupied[pair / 64] >> (pair % 64) & 1 == 1
    }

    pub(crate) fn set_occupied(&mut self, pair: usize, on: bool) {
        let bit = 1u64 << (pair % 64);
        if on {
            self.occupied[pair / 64] |= bit;
        } else {
            self.occupied[pair / 64] &= !bit;
        }
    }

    /// Points connection `c` at the dormant `pair`. The caller has already
    /// released the old pair.
    pub(crate) fn assign(&mut self, c: usize, pair: usize, sign: i8, theta: f32) {
        self.set_occupied(pair, true);
        self.pre[c] = (pair % self.inputs) as u32;
        self.post[c] = (pair / self.inputs) as u32;
        self.sign[c] = sign;
        self.theta[c] = theta;
    }

    /// Effective weight of connection `c`; zero once its amplitude has
    /// reached zero and it waits to be pruned.
    #[inline]
    pub fn weight(&self, c: usize) -> f32 {
        let t = self.theta[c];
        if t > 0.0 {
            self.sign[c] as f32 * t
        } else {
            0.0
        }
    }

    /// Row-major `[outputs][inputs]` weights with zeros at dormant pairs.
    pub fn dense_weights(&self) -> Vec<f32> {
        let mut w = vec![0.0; self.dense_size()];
        for c in 0..self.k() {
            w[self.pair(self.pre[c], self.post[c])] = self.weight(c);
        }
        w
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Count, uniqueness and sign checks; with `strict`, also `θ > 0`.
    pub fn check(&self, k: usize, strict: bool) -> Result<()> {
        let bad = |m: String| Err(RewireError::Invariant(m));
        if self.k() != k || self.occupied_count() != k {
            return bad(format!(
                "{} connections ({} distinct pairs), budget {k}",
                self.k(),
                self.occupied_count()
            ));
        }
        if let Some(c) = self.sign.iter().position(|s| s.abs() != 1) {
            return bad(format!("connection {c} has sign {}", self.sign[c]));
        }
        if strict {
            if let Some(c) = self.theta.iter().position(|t| !(*t > 0.0)) {
                return bad(format!("connection {c} is active with θ = {}", self.theta[c]));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseConnectome {
    pub layers: Vec<SparseLayer>,
    /// Active budget per layer.
    pub budget: Vec<usize>,
}

impl SparseConnectome {
    /// Random connectome for `arch` (layer widths, input first) with `budget`
    /// active connections per layer, each layer drawn from its own stream.
    pub fn random<R: Rng>(arch: &[usize], budget: &[usize], rngs: &mut [R]) -> Result<Self> {
        if arch.len() < 2 || budget.len() != arch.len() - 1 || rngs.len() != budget.len() {
            return Err(RewireError::ShapeMismatch(format!(
                "{} widths, {} budgets, {} streams",
                arch.len(),
                budget.len(),
                rngs.len()
            )));
        }
        let layers = (0..budget.len())
            .map(|l| {
                SparseLayer::random(arch[l], arch[l + 1], budget[l], &mut rngs[l]).map_err(|e| match e {
                    RewireError::PoolExhausted { needed, dormant, .. } => {
                        RewireError::PoolExhausted { layer: l, needed, dormant }
                    }
                    other => other,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            layers,
            budget: budget.to_vec(),
        })
    }

    pub fn arch(&self) -> Vec<usize> {
        let mut a = vec![self.layers[0].inputs];
        a.extend(self.layers.iter().map(|l| l.outputs));
        a
    }

    pub fn active(&self) -> usize {
        self.layers.iter().map(SparseLayer::k).sum()
    }

    pub fn dense_size(&self) -> usize {
        self.layers.iter().map(SparseLayer::dense_size).sum()
    }

    pub fn connectivity(&self) -> f64 {
        self.active() as f64 / self.dense_size() as f64
    }

    pub fn check(&self, strict: bool) -> Result<()> {
        for (l, (layer, &k)) in self.layers.iter().zip(&self.budget).enumerate() {
            layer
                .check(k, strict)
                .map_err(|e| RewireError::Invariant(format!("layer {l}: {e}")))?;
        }
        Ok(())
    }
}

/// Splits `round(connectivity · dense)` active connections over layers in
/// proportion to `sqrt(dense_l)`, so small layers keep a usable share.
/// Rounding error goes to the first layer.
pub fn split_budget(arch: &[usize], connectivity: f64) -> Result<Vec<usize>> {
    if arch.len() < 2 || arch.contains(&0) {
        return Err(RewireError::ShapeMismatch(format!("bad architecture {arch:?}")));
    }
    if !(connectivity > 0.0 && connectivity <= 1.0) {
        return Err(RewireError::InvalidHyper(format!(
            "connectivity {connectivity} outside (0, 1]"
        )));
    }
    let dense: Vec<usize> = arch.windows(2).map(|w| w[0] * w[1]).collect();
    let total = (connectivity * dense.iter().sum::<usize>() as f64).round() as usize;
    let weights: Vec<f64> = dense.iter().map(|&d| (d as f64).sqrt()).collect();
    let wsum: f64 = weights.iter().sum();
    let mut ks: Vec<usize> = weights
        .iter()
        .zip(&dense)
        .map(|(w, &d)| ((total as f64 * w / wsum).floor() as usize).min(d))
        .collect();
    let assigned: usize = ks.iter().sum();
    ks[0] = (ks[0] + total.saturating_sub(assigned)).min(dense[0]);
    Ok(ks)
}
