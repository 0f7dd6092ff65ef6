/// Probabilities are clamped to this floor before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Cross-entropy `-ln p[label]` of a probability vector, together with the
/// gradient with respect to the logits that produced it through softmax,
/// `p - onehot(label)`.
pub fn xent_loss(probs: &[f64], label: usize) -> (f64, Vec<f64>) {
    assert!(label < probs.len(), "label {label} out of range for {} classes", probs.len());
    let loss = -probs[label].max(PROB_FLOOR).ln();
    let mut grad = probs.to_vec();
    grad[label] -= 1.0;
    (loss, grad)
}
