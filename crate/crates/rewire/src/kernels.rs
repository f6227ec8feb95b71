//! Per-layer forward/backward kernels in f32. The standalone trainer and the
//! fabric layer PEs call exactly these, in the same order, so both produce
//! bit-identical parameters.

use crate::connectome::{SparseConnectome, SparseLayer};
use crate::error::{Result, RewireError};

/// `z = b + W x` over active connections, in connection order.
pub fn layer_forward(layer: &SparseLayer, x: &[f32], z: &mut [f32]) {
    z.copy_from_slice(&layer.bias);
    for c in 0..layer.k() {
        z[layer.post[c] as usize] += layer.weight(c) * x[layer.pre[c] as usize];
    }
}

pub fn relu(z: &[f32], a: &mut [f32]) {
    for (a, &z) in a.iter_mut().zip(z) {
        *a = z.max(0.0);
    }
}

/// Writes `scale · (softmax(logits) − onehot(label))` to `delta` and returns
/// the cross-entropy loss.
pub fn softmax_delta(logits: &[f32], label: usize, scale: f32, delta: &mut [f32]) -> f32 {
    let m = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for (d, &l) in delta.iter_mut().zip(logits) {
        *d = (l - m).exp();
        sum += *d;
    }
    for (o, d) in delta.iter_mut().enumerate() {
        let p = *d / sum;
        *d = scale * (p - if o == label { 1.0 } else { 0.0 });
    }
    -(logits[label] - m - sum.ln())
}

/// Accumulates weight and bias gradients for one sample. Every stored
/// connection gets a gradient, including ones waiting to be pruned. With
/// `delta_in`, also writes `Wᵀ δ` (not yet masked by the previous layer's
/// activation derivative).
pub fn layer_backward(
    layer: &SparseLayer,
    x: &[f32],
    delta: &[f32],
    grad_w: &mut [f32],
    grad_b: &mut [f32],
    delta_in: Option<&mut [f32]>,
) {
    for (g, d) in grad_b.iter_mut().zip(delta) {
        *g += d;
    }
    for c in 0..layer.k() {
        grad_w[c] += delta[layer.post[c] as usize] * x[layer.pre[c] as usize];
    }
    if let Some(din) = delta_in {
        din.fill(0.0);
        for c in 0..layer.k() {
            din[layer.pre[c] as usize] += layer.weight(c) * delta[layer.post[c] as usize];
        }
    }
}

/// Zeroes `delta` where the pre-activation was not positive.
pub fn relu_mask(z: &[f32], delta: &mut [f32]) {
    for (d, &z) in delta.iter_mut().zip(z) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
}

pub fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Per-layer gradient accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w: Vec<Vec<f32>>,
    pub b: Vec<Vec<f32>>,
}

impl Gradients {
    pub fn zeros(net: &SparseConnectome) -> Self {
        Self {
            w: net.layers.iter().map(|l| vec![0.0; l.k()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }

    pub fn clear(&mut self) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|v| v.fill(0.0));
    }
}

/// Scratch buffers for one sample's pass through the network.
#[derive(Clone, Debug)]
pub struct Workspace {
    /// Pre-activations per layer.
    pub z: Vec<Vec<f32>>,
    /// Layer inputs: `a[0]` is the sample, `a[l]` the activation feeding
    /// layer `l`.
    pub a: Vec<Vec<f32>>,
    pub delta: Vec<Vec<f32>>,
}

impl Workspace {
    pub fn new(arch: &[usize]) -> Self {
        Self {
            z: arch[1..].iter().map(|&n| vec![0.0; n]).collect(),
            a: arch[..arch.len() - 1].iter().map(|&n| vec![0.0; n]).collect(),
            delta: arch[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

fn check_input(net: &SparseConnectome, x: &[f32]) -> Result<()> {
    if x.len() != net.layers[0].inputs {
        return Err(RewireError::ShapeMismatch(format!(
            "input has {} features, layer 0 expects {}",
            x.len(),
            net.layers[0].inputs
        )));
    }
    Ok(())
}

/// Forward pass; logits end up in `ws.z.last()`.
pub fn forward(net: &SparseConnectome, x: &[f32], ws: &mut Workspace) -> Result<()> {
    check_input(net, x)?;
    ws.a[0].copy_from_slice(x);
    let last = net.layers.len() - 1;
    for (l, layer) in net.layers.iter().enumerate() {
        layer_forward(layer, &ws.a[l], &mut ws.z[l]);
        if l < last {
            let (z, a) = (&ws.z[l], &mut ws.a[l + 1]);
            relu(z, a);
        }
    }
    Ok(())
}

/// Forward and backward for one sample, adding `scale`-weighted gradients
/// into `grads`. Returns the loss and whether the prediction was correct.
pub fn train_sample(
    net: &SparseConnectome,
    x: &[f32],
    label: usize,
    scale: f32,
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> Result<(f32, bool)> {
    forward(net, x, ws)?;
    let last = net.layers.len() - 1;
    let correct = argmax(&ws.z[last]) == label;
    let loss = softmax_delta(&ws.z[last], label, scale, &mut ws.delta[last]);
    for l in (0..=last).rev() {
        let (lower, upper) = ws.delta.split_at_mut(l);
        let din = if l > 0 { Some(&mut lower[l - 1][..]) } else { None };
        layer_backward(&net.layers[l], &ws.a[l], &upper[0], &mut grads.w[l], &mut grads.b[l], din);
        if l > 0 {
            relu_mask(&ws.z[l - 1], &mut ws.delta[l - 1]);
        }
    }
    Ok((loss, correct))
}

/// Mean-loss gradients over a batch of `(features, label)` samples.
pub fn batch_gradients(net: &SparseConnectome, batch: &[(&[f32], usize)]) -> Result<(f32, Gradients)> {
    let mut ws = Workspace::new(&net.arch());
    let mut g = Gradients::zeros(net);
    let scale = 1.0 / batch.len() as f32;
    let mut loss = 0.0;
    for &(x, y) in batch {
        loss += train_sample(net, x, y, scale, &mut ws, &mut g)?.0;
    }
    Ok((loss * scale, g))
}

/// Logits for one sample.
pub fn logits(net: &SparseConnectome, x: &[f32]) -> Result<Vec<f32>> {
    let mut ws = Workspace::new(&net.arch());
    forward(net, x, &mut ws)?;
    Ok(ws.z.pop().expect("at least one layer"))
}
