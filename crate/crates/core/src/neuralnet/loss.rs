//! Softmax with categorical cross-entropy, fused for numerical stability.

use super::NnError;

/// Returns (probs, loss, gradLogits) for one logit vector and a target
/// class. The loss uses the log-sum-exp form, so extreme logits give a
/// large finite loss instead of -ln(0).
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(Vec<f64>, f64, Vec<f64>), NnError> {
    if logits.is_empty() || target >= logits.len() {
        return Err(NnError::InvalidTarget { index: target, classes: logits.len() });
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    let loss = sum.ln() - (logits[target] - max);
    let grad = probs
        .iter()
        .enumerate()
        .map(|(i, p)| if i == target { p - 1.0 } else { *p })
        .collect();
    Ok((probs, loss, grad))
}
