//! Dense feed-forward LIF networks and the latency input code.

use evfabric_snn::LifParams;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{EventpropError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedForwardSnn {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    /// Per trained layer, row-major `[post][pre]`.
    pub weights: Vec<Vec<f32>>,
    /// Neuron parameters per trained layer.
    pub lif: Vec<LifParams>,
    /// Simulated ticks per sample.
    pub horizon: u32,
}

impl FeedForwardSnn {
    pub fn zeros(sizes: &[usize], lif: LifParams, horizon: u32) -> Result<Self> {
        let net = Self {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            lif: vec![lif; sizes.len().saturating_sub(1)],
            horizon,
        };
        net.validate()?;
        Ok(net)
    }

    /// Weights drawn from `N(mean · v_th / fan_in, (std · v_th)² / fan_in)`.
    pub fn random<R: Rng>(
        sizes: &[usize],
        lif: LifParams,
        horizon: u32,
        mean: f32,
        std: f32,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, lif, horizon)?;
        for l in 0..net.layers() {
            net.redraw_layer(l, mean, std, rng)?;
        }
        Ok(net)
    }

    /// Redraws one layer as in [`FeedForwardSnn::random`].
    pub fn redraw_layer<R: Rng>(&mut self, layer: usize, mean: f32, std: f32, rng: &mut R) -> Result<()> {
        if layer >= self.layers() {
            return Err(EventpropError::InvalidNet(format!("no trained layer {layer}")));
        }
        let fan_in = self.sizes[layer] as f32;
        let v_th = self.lif[layer].v_th;
        let dist = Normal::new(mean * v_th / fan_in, std * v_th / fan_in.sqrt())
            .map_err(|e| EventpropError::InvalidNet(e.to_string()))?;
        self.weights[layer].iter_mut().for_each(|x| *x = dist.sample(rng));
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EventpropError::InvalidNet(m));
        if self.sizes.len() < 2 || self.sizes.contains(&0) {
            return bad(format!("layer sizes {:?}", self.sizes));
        }
        if self.sizes.iter().any(|&n| n > MAX_LAYER_WIDTH) {
            return bad(format!("layers are limited to {MAX_LAYER_WIDTH} neurons"));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.weights.len() != self.sizes.len() - 1 || self.lif.len() != self.weights.len() {
            return bad(format!(
                "{} weight matrices and {} parameter sets for {} layers",
                self.weights.len(),
                self.lif.len(),
                self.sizes.len() - 1
            ));
        }
        for (l, w) in self.weights.iter().enumerate() {
            if w.len() != self.sizes[l] * self.sizes[l + 1] {
                return bad(format!("layer {l} has {} weights", w.len()));
            }
            if w.iter().any(|x| !x.is_finite()) {
                return bad(format!("layer {l} has a non-finite weight"));
            }
        }
        for (l, p) in self.lif.iter().enumerate() {
            if !(p.alpha > 0.0 && p.alpha <= 1.0) || !(p.v_th > p.v_reset) {
                return bad(format!("layer {l}: need 0 < alpha <= 1 and v_th > v_reset"));
            }
        }
        Ok(())
    }
}

/// Neuron index bits in a routing key.
pub const MAX_LAYER_WIDTH: usize = 1 << 12;

/// Latency code: each input neuron fires once, earlier for larger values.
/// With `push_pull`, feature `f` drives neuron `2f` with `x` and `2f + 1`
/// with `-x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyEncoder {
    pub lo: f32,
    pub hi: f32,
    /// Latest input tick; values at or below `lo` fire here.
    pub t_last: u32,
    pub push_pull: bool,
}

impl Default for LatencyEncoder {
    fn default() -> Self {
        Self {
            lo: -2.0,
            hi: 2.0,
            t_last: 10,
            push_pull: true,
        }
    }
}

impl LatencyEncoder {
    pub fn inputs(&self, features: usize) -> usize {
        if self.push_pull {
            2 * features
        } else {
            features
        }
    }

    pub fn tick(&self, x: f32) -> u32 {
        let u = ((self.hi - x) / (self.hi - self.lo)).clamp(0.0, 1.0);
        1 + (u * (self.t_last - 1) as f32).round() as u32
    }

    /// `(tick, neuron)` pairs ordered by tick, then neuron.
    pub fn encode(&self, features: &[f32]) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.inputs(features.len()));
        for (f, &x) in features.iter().enumerate() {
            if self.push_pull {
                out.push((self.tick(x), 2 * f as u32));
                out.push((self.tick(-x), 2 * f as u32 + 1));
            } else {
                out.push((self.tick(x), f as u32));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hi > self.lo) || self.t_last == 0 {
            return Err(EventpropError::InvalidConfig("encoder needs hi > lo and t_last >= 1".into()));
        }
        Ok(())
    }
}

/// Two Gaussian classes centred at `±1` in every dimension, labels
/// alternating.
pub fn blobs<R: Rng>(n: usize, dim: usize, sigma: f32, rng: &mut R) -> Vec<(Vec<f32>, usize)> {
    let noise = Normal::new(0.0f32, sigma).expect("sigma >= 0");
    (0..n)
        .map(|i| {
            let y = i % 2;
            let c = if y == 0 { -1.0 } else { 1.0 };
            ((0..dim).map(|_| c + noise.sample(rng)).collect(), y)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_orders_spikes() {
        let e = LatencyEncoder::default();
        assert_eq!(e.tick(2.0), 1);
        assert_eq!(e.tick(-5.0), 10);
        assert_eq!(e.encode(&[2.0]), vec![(1, 0), (10, 1)]);
        let plain = LatencyEncoder { push_pull: false, ..e };
        assert_eq!(plain.encode(&[0.0, 2.0]), vec![(1, 1), (6, 0)]);
    }

    #[test]
    fn validation() {
        let p = LifParams::default();
        assert!(FeedForwardSnn::zeros(&[2], p, 5).is_err());
        assert!(FeedForwardSnn::zeros(&[2, 2], p, 0).is_err());
        let mut n = FeedForwardSnn::zeros(&[2, 3], p, 5).unwrap();
        n.weights[0].pop();
        assert!(n.validate().is_err());
    }
}
