//! Loss functions returning (value, gradient with respect to the network
//! output).

use crate::error::{Error, Result};
use crate::num::Real;

/// Softmax cross entropy against a hard label. The value is computed via
/// log-sum-exp so huge logits cannot overflow; the gradient is the softmax
/// probabilities minus the one-hot target.
pub fn softmax_cross_entropy<F: Real>(logits: &[F], label: usize) -> Result<(F, Vec<F>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().cloned().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for &l in logits {
        sum += (l - max).exp();
    }
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<F> = logits.iter().map(|&l| (l - max).exp() / sum).collect();
    grad[label] -= F::one();
    Ok((loss, grad))
}

/// Mean squared error over flat arrays; gradient is 2(pred - target)/n.
pub fn mse<F: Real>(pred: &[F], target: &[F]) -> Result<(F, Vec<F>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "mse needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let inv = F::from_f64(1.0 / pred.len() as f64);
    let mut loss = F::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let d = p - t;
        loss += d * d;
        grad.push((d + d) * inv);
    }
    Ok((loss * inv, grad))
}
