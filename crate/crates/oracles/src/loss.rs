/// Softmax cross-entropy of logits `-tau / scale` against `label`, evaluated
/// term by term in f64 without the max-shift trick.
pub fn ttfs_cross_entropy(tau: &[f64], label: usize, scale: f64) -> f64 {
    let exps: Vec<f64> = tau.iter().map(|t| (-t / scale).exp()).collect();
    let z: f64 = exps.iter().sum();
    -(exps[label] / z).ln()
}
