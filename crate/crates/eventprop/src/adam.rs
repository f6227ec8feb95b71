use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamHyper {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moments for every weight, flattened over layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub step: u32,
}

impl AdamState {
    pub fn new(weights: usize, hyper: AdamHyper) -> Self {
        Self {
            hyper,
            m: vec![0.0; weights],
            v: vec![0.0; weights],
            step: 0,
        }
    }

    /// One bias-corrected step on `w` with gradient `g`.
    pub fn apply(&mut self, w: &mut [f32], g: &[f32]) {
        assert_eq!(w.len(), self.m.len(), "weight count changed");
        let AdamHyper { lr, beta1, beta2, eps } = self.hyper;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for k in 0..w.len() {
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g[k];
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g[k] * g[k];
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            w[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
