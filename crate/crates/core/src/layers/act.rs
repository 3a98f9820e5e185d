//! Elementwise activations and the softmax head. All operate on flat slices
//! so quaternion and real maps share one implementation; quaternion maps
//! apply them per part.

use crate::num::Real;

/// max(0, x) elementwise.
pub fn relu_forward<F: Real>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| if v > F::zero() { v } else { F::zero() }).collect()
}

/// Passes gradient where the forward input was strictly positive; the
/// subgradient at exactly zero is taken as zero.
pub fn relu_backward<F: Real>(x: &[F], grad_out: &[F]) -> Vec<F> {
    debug_assert_eq!(x.len(), grad_out.len());
    x.iter()
        .zip(grad_out)
        .map(|(&v, &g)| if v > F::zero() { g } else { F::zero() })
        .collect()
}

/// tanh elementwise; return value should be cached for the backward pass.
pub fn tanh_forward<F: Real>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| v.tanh()).collect()
}

/// Gradient through tanh given the forward *output*: g * (1 - y^2).
pub fn tanh_backward<F: Real>(y: &[F], grad_out: &[F]) -> Vec<F> {
    debug_assert_eq!(y.len(), grad_out.len());
    y.iter()
        .zip(grad_out)
        .map(|(&v, &g)| g * (F::one() - v * v))
        .collect()
}

/// Numerically stable softmax: shifts by the max before exponentiating.
/// Output sums to 1 and every entry is positive for finite input.
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: F = exps.iter().cloned().fold(F::zero(), |a, b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}
