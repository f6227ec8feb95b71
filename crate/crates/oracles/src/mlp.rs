//! Dense masked multilayer perceptron with ReLU hidden layers and a softmax
//! cross-entropy head, in f64 with explicit loops.

pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `[outputs][inputs]`, zero where the mask is off.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let mut s = self.bias[o];
                for i in 0..self.inputs {
                    s += self.weights[o * self.inputs + i] * x[i];
                }
                s
            })
            .collect()
    }
}

/// Logits for one sample.
pub fn forward(layers: &[DenseLayer], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (li, l) in layers.iter().enumerate() {
        a = l.apply(&a);
        if li + 1 < layers.len() {
            a.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    a
}

pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    -(logits[label] - m - z.ln())
}

/// Gradients of the mean cross-entropy over `batch` w.r.t. every dense
/// weight and bias, by backpropagation through explicit activations.
pub fn gradients(layers: &[DenseLayer], batch: &[(Vec<f64>, usize)]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.outputs]))
        .collect();
    let scale = 1.0 / batch.len() as f64;
    for (x, label) in batch {
        let mut acts = vec![x.clone()];
        let mut pre = Vec::new();
        for (li, l) in layers.iter().enumerate() {
            let z = l.apply(acts.last().unwrap());
            let a = if li + 1 < layers.len() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            acts.push(a);
        }
        let logits = acts.last().unwrap();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        let mut delta: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(c, l)| (l - m).exp() / z - if c == *label { 1.0 } else { 0.0 })
            .collect();
        for li in (0..layers.len()).rev() {
            let l = &layers[li];
            let input = &acts[li];
            for o in 0..l.outputs {
                grads[li].1[o] += scale * delta[o];
                for i in 0..l.inputs {
                    grads[li].0[o * l.inputs + i] += scale * delta[o] * input[i];
                }
            }
            if li > 0 {
                let mut back = vec![0.0; l.inputs];
                for o in 0..l.outputs {
                    for i in 0..l.inputs {
                        back[i] += l.weights[o * l.inputs + i] * delta[o];
                    }
                }
                for i in 0..l.inputs {
                    if pre[li - 1][i] <= 0.0 {
                        back[i] = 0.0;
                    }
                }
                delta = back;
            }
        }
    }
    grads
}
