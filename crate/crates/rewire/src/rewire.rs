//! Amplitude update and the prune/regrow pass.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::connectome::SparseLayer;
use crate::error::{Result, RewireError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewireHyper {
    /// Learning rate η.
    pub lr: f32,
    /// L1 coefficient α.
    pub l1: f32,
    /// Temperature T; the per-step noise is `sqrt(2 η T) · N(0, 1)`.
    pub temperature: f32,
    /// Steps between prune/regrow passes in the first epoch.
    pub rewire_period: usize,
    /// Factor applied to the period after every epoch.
    pub period_growth: usize,
    /// Amplitude given to regrown connections.
    pub theta0: f32,
    pub seed: u64,
}

impl Default for RewireHyper {
    fn default() -> Self {
        Self {
            lr: 0.1,
            l1: 1e-4,
            temperature: 1e-10,
            rewire_period: 1,
            period_growth: 2,
            theta0: 1e-3,
            seed: 0,
        }
    }
}

impl RewireHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RewireError::InvalidHyper(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        if !(self.l1 >= 0.0) || !(self.temperature >= 0.0) {
            return bad("l1 and temperature must be >= 0");
        }
        if self.rewire_period == 0 || self.period_growth == 0 {
            return bad("rewire_period and period_growth must be >= 1");
        }
        if !(self.theta0 > 0.0) {
            return bad("theta0 must be > 0");
        }
        Ok(())
    }

    /// Rewire period in `epoch`, never longer than an epoch.
    pub fn period(&self, epoch: usize, steps_per_epoch: usize) -> usize {
        let mut r = self.rewire_period;
        for _ in 0..epoch {
            r = r.saturating_mul(self.period_growth);
            if r >= steps_per_epoch {
                break;
            }
        }
        r.min(steps_per_epoch.max(1))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewireStats {
    pub pruned: usize,
    pub regrown: usize,
}

/// One SGD step on a layer. Amplitudes of live connections take the
/// gradient, L1 and noise terms; connections at `θ ≤ 0` stay frozen until
/// the next prune pass. Biases take plain SGD. Noise is drawn from `rng` in
/// connection order and only when `T > 0`.
pub fn update_layer<R: Rng>(
    layer: &mut SparseLayer,
    grad_w: &[f32],
    grad_b: &[f32],
    hyper: &RewireHyper,
    rng: &mut R,
) {
    let eta = hyper.lr;
    let noise = (2.0 * eta * hyper.temperature).sqrt();
    for c in 0..layer.k() {
        if layer.theta[c] <= 0.0 {
            continue;
        }
        let mut t = layer.theta[c] - eta * (layer.sign[c] as f32 * grad_w[c]) - eta * hyper.l1;
        if noise > 0.0 {
            let nu: f32 = StandardNormal.sample(rng);
            t += noise * nu;
        }
        layer.theta[c] = t;
    }
    for (b, g) in layer.bias.iter_mut().zip(grad_b) {
        *b -= eta * g;
    }
}

/// Prunes every connection with `θ ≤ 0` and regrows as many at dormant
/// pairs drawn uniformly without replacement, each with amplitude `θ0` and
/// a fresh random sign. Regrown connections take the pruned ones' slots in
/// order.
pub fn prune_and_regrow<R: Rng>(
    layer: &mut SparseLayer,
    layer_index: usize,
    theta0: f32,
    rng: &mut R,
) -> Result<RewireStats> {
    let pruned: Vec<usize> = (0..layer.k()).filter(|&c| layer.theta[c] <= 0.0).collect();
    if pruned.is_empty() {
        return Ok(RewireStats::default());
    }
    let total = layer.dense_size();
    let dormant = total - (layer.k() - pruned.len());
    if dormant < pruned.len() {
        return Err(RewireError::PoolExhausted {
            layer: layer_index,
            needed: pruned.len(),
            dormant,
        });
    }
    for &c in &pruned {
        let pair = layer.pre[c] as usize + layer.post[c] as usize * layer.inputs;
        layer.set_occupied(pair, false);
    }
    // Sequential draws, each uniform over the pairs still dormant.
    let dense_enough = 2 * (layer.k() - pruned.len()) > total;
    let mut pool: Vec<usize> = if dense_enough {
        (0..total).filter(|&p| !layer.is_active(p)).collect()
    } else {
        Vec::new()
    };
    for &c in &pruned {
        let pair = if dense_enough {
            pool.swap_remove(rng.random_range(0..pool.len()))
        } else {
            loop {
                let p = rng.random_range(0..total);
                if !layer.is_active(p) {
                    break p;
                }
            }
        };
        let sign = if rng.random::<bool>() { 1 } else { -1 };
        layer.assign(c, pair, sign, theta0);
    }
    Ok(RewireStats {
        pruned: pruned.len(),
        regrown: pruned.len(),
    })
}
