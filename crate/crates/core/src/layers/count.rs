//! Parameter and multiplication accounting.
//!
//! A quaternion conv tap stores two scalars (s, theta) against one for a real
//! tap, so it doubles parameters; applying one tap costs the 9 multiplies of
//! a 3x3 matrix-vector product against 1, so it is 9x the multiplies for the
//! same filter count. Multiplication counts use the input spatial size N and
//! assume an N x N output grid (stride 1, size-preserving padding).

/// Parameters and multiplies for a quaternion convolution with K filters,
/// C input channels, L x L kernels over an N x N input.
pub fn qconv_counts(k: usize, c: usize, l: usize, n: usize) -> (u64, u64) {
    let taps = (k * c * l * l) as u64;
    (2 * taps, 9 * taps * (n * n) as u64)
}

/// Same accounting for a real convolution.
pub fn real_conv_counts(k: usize, c: usize, l: usize, n: usize) -> (u64, u64) {
    let taps = (k * c * l * l) as u64;
    (taps, taps * (n * n) as u64)
}

/// Quaternion dense layer mapping N inputs to M outputs.
pub fn qdense_counts(m: usize, n: usize) -> (u64, u64) {
    let taps = (m * n) as u64;
    (2 * taps, 9 * taps)
}

/// Real dense layer.
pub fn real_dense_counts(m: usize, n: usize) -> (u64, u64) {
    let taps = (m * n) as u64;
    (taps, taps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_counts_reference_values() {
        // 32 filters over 16 channels, 3x3 kernels, 32x32 input.
        let (qp, qm) = qconv_counts(32, 16, 3, 32);
        assert_eq!(qp, 9216);
        assert_eq!(qm, 42_467_328);
        let (rp, rm) = real_conv_counts(32, 16, 3, 32);
        assert_eq!(rp, 4608);
        assert_eq!(rm, 4_718_592);
        // Fixed ratios: 2x parameters, 9x multiplies.
        assert_eq!(qp, 2 * rp);
        assert_eq!(qm, 9 * rm);
    }

    #[test]
    fn dense_counts_scale_like_conv_taps() {
        let (qp, qm) = qdense_counts(512, 4096);
        let (rp, rm) = real_dense_counts(512, 4096);
        assert_eq!(qp, 2 * rp);
        assert_eq!(qm, 9 * rm);
        assert_eq!(rp, 2_097_152);
    }
}
