//! Central finite differences of the simulator's own loss, restricted to
//! weights whose perturbation leaves every layer's spike count unchanged.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::forward::forward;
use crate::loss::ttfs_loss;
use crate::net::FeedForwardSnn;
use crate::train::{sample_gradients, EventpropConfig, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub h: f32,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            rtol: 1e-2,
            atol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub weights: usize,
    /// Weights whose `±h` perturbation kept all spike counts.
    pub stable: usize,
    pub passed: usize,
    /// `(layer, index, adjoint, finite difference)` of stable failures.
    pub failures: Vec<(usize, usize, f64, f64)>,
}

impl GradCheck {
    pub fn pass_rate(&self) -> f64 {
        if self.stable == 0 {
            1.0
        } else {
            self.passed as f64 / self.stable as f64
        }
    }

    pub fn merge(&mut self, other: GradCheck) {
        self.weights += other.weights;
        self.stable += other.stable;
        self.passed += other.passed;
        self.failures.extend(other.failures);
    }
}

fn loss_and_counts(net: &FeedForwardSnn, sample: &Sample, cfg: &EventpropConfig) -> Result<(f64, Vec<usize>)> {
    let record = forward(net, &sample.spikes)?;
    let tau = record.first_spike_times(*net.sizes.last().unwrap(), cfg.t_max(net));
    Ok((ttfs_loss(&tau, sample.label, cfg.tau_scale(net)).0, record.counts()))
}

pub fn gradient_check(
    net: &FeedForwardSnn,
    sample: &Sample,
    cfg: &EventpropConfig,
    check: &GradCheckConfig,
) -> Result<GradCheck> {
    let adjoint = sample_gradients(net, sample, cfg)?;
    let counts = adjoint.record.counts();
    let mut out = GradCheck::default();
    let mut probe = net.clone();
    for l in 0..net.layers() {
        for k in 0..net.weights[l].len() {
            out.weights += 1;
            let w = net.weights[l][k];
            probe.weights[l][k] = w + check.h;
            let (up, cu) = loss_and_counts(&probe, sample, cfg)?;
            probe.weights[l][k] = w - check.h;
            let (down, cd) = loss_and_counts(&probe, sample, cfg)?;
            probe.weights[l][k] = w;
            if cu != counts || cd != counts {
                continue;
            }
            out.stable += 1;
            // Step actually taken in f32.
            let step = ((w + check.h) as f64) - ((w - check.h) as f64);
            let fd = (up - down) / step;
            let a = adjoint.grads[l][k] as f64;
            if (a - fd).abs() <= check.atol + check.rtol * fd.abs() {
                out.passed += 1;
            } else {
                out.failures.push((l, k, a, fd));
            }
        }
    }
    Ok(out)
}
