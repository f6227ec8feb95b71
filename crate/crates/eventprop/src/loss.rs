//! Time-to-first-spike cross-entropy.

/// Softmax cross-entropy over logits `−τ_c / scale`; returns the loss and
/// `dL/dτ`.
pub fn ttfs_loss(tau: &[f64], label: usize, scale: f64) -> (f64, Vec<f64>) {
    let z: Vec<f64> = tau.iter().map(|t| -t / scale).collect();
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = e.iter().sum();
    let loss = -(z[label] - m - sum.ln());
    let grad = e
        .iter()
        .enumerate()
        .map(|(c, e)| (e / sum - (c == label) as u8 as f64) * (-1.0 / scale))
        .collect();
    (loss, grad)
}

/// Earliest output; ties go to the lower index.
pub fn predict(tau: &[f64]) -> usize {
    let mut best = 0;
    for (c, &t) in tau.iter().enumerate() {
        if t < tau[best] {
            best = c;
        }
    }
    best
}
