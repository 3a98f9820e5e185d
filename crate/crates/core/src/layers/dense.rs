//! Dense (fully connected) layers. The quaternion version applies one
//! scaled gray-axis rotation per (output, input) pair and sums over inputs;
//! the real version is a plain weight matrix. Gradients follow the same
//! per-tap identities as the convolutions.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::qtensor::QVector;
use crate::quat::{rotation_coeffs, rotation_coeffs_deriv, RotationCoeffs};

/// Quaternion dense parameters, laid out `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QDenseKernel<F> {
    pub s: Vec<F>,
    pub theta: Vec<F>,
    pub out_len: usize,
    pub in_len: usize,
}

impl<F: Real> QDenseKernel<F> {
    pub fn zeros(out_len: usize, in_len: usize) -> Self {
        let n = out_len * in_len;
        QDenseKernel { s: vec![F::zero(); n], theta: vec![F::zero(); n], out_len, in_len }
    }

    pub fn from_parts(out_len: usize, in_len: usize, s: Vec<F>, theta: Vec<F>) -> Result<Self> {
        let n = out_len * in_len;
        if s.len() != n || theta.len() != n {
            return Err(Error::shape(format!(
                "dense kernel ({out_len},{in_len}) needs {n} taps, got s={} theta={}",
                s.len(),
                theta.len()
            )));
        }
        Ok(QDenseKernel { s, theta, out_len, in_len })
    }
}

/// Cached per-tap rotation tables; rebuild after every parameter update.
#[derive(Clone, Debug)]
pub struct QDenseCache<F> {
    co: Vec<RotationCoeffs<F>>,
    dco: Vec<RotationCoeffs<F>>,
}

impl<F: Real> QDenseCache<F> {
    pub fn new(kernel: &QDenseKernel<F>) -> Self {
        QDenseCache {
            co: kernel.theta.iter().map(|&t| rotation_coeffs(t)).collect(),
            dco: kernel.theta.iter().map(|&t| rotation_coeffs_deriv(t)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QDenseGrads<F> {
    pub input: QVector<F>,
    pub s: Vec<F>,
    pub theta: Vec<F>,
}

fn check_qdense_input<F: Real>(x: &QVector<F>, kernel: &QDenseKernel<F>) -> Result<()> {
    if x.len() != kernel.in_len {
        return Err(Error::shape(format!(
            "input vector has {} quaternions, kernel expects {}",
            x.len(),
            kernel.in_len
        )));
    }
    Ok(())
}

pub fn qdense_forward_cached<F: Real>(x: &QVector<F>, kernel: &QDenseKernel<F>, cache: &QDenseCache<F>) -> Result<QVector<F>> {
    check_qdense_input(x, kernel)?;
    let mut out = QVector::zeros(kernel.out_len);
    for m in 0..kernel.out_len {
        let row = &kernel.s[m * kernel.in_len..(m + 1) * kernel.in_len];
        let cos = &cache.co[m * kernel.in_len..(m + 1) * kernel.in_len];
        let mut acc = [F::zero(); 3];
        for n in 0..kernel.in_len {
            let v = cos[n].apply(x.get(n));
            let s = row[n];
            acc[0] += s * v[0];
            acc[1] += s * v[1];
            acc[2] += s * v[2];
        }
        out.set(m, acc);
    }
    Ok(out)
}

pub fn qdense_forward<F: Real>(x: &QVector<F>, kernel: &QDenseKernel<F>) -> Result<QVector<F>> {
    qdense_forward_cached(x, kernel, &QDenseCache::new(kernel))
}

pub fn qdense_backward_cached<F: Real>(
    x: &QVector<F>,
    kernel: &QDenseKernel<F>,
    grad_out: &QVector<F>,
    cache: &QDenseCache<F>,
) -> Result<QDenseGrads<F>> {
    check_qdense_input(x, kernel)?;
    if grad_out.len() != kernel.out_len {
        return Err(Error::shape(format!(
            "gradient vector has {} quaternions, expected {}",
            grad_out.len(),
            kernel.out_len
        )));
    }
    let mut dx = QVector::zeros(kernel.in_len);
    let mut ds = vec![F::zero(); kernel.s.len()];
    let mut dtheta = vec![F::zero(); kernel.s.len()];
    for m in 0..kernel.out_len {
        let g = grad_out.get(m);
        for n in 0..kernel.in_len {
            let t = m * kernel.in_len + n;
            let xv = x.get(n);
            let s = kernel.s[t];
            let rot = cache.co[t].apply(xv);
            let drot = cache.dco[t].apply(xv);
            ds[t] = g[0] * rot[0] + g[1] * rot[1] + g[2] * rot[2];
            dtheta[t] = s * (g[0] * drot[0] + g[1] * drot[1] + g[2] * drot[2]);
            // dx accumulates s * R^T g across output elements.
            let back = cache.co[t].apply_transpose(g);
            let mut acc = dx.get(n);
            acc[0] += s * back[0];
            acc[1] += s * back[1];
            acc[2] += s * back[2];
            dx.set(n, acc);
        }
    }
    Ok(QDenseGrads { input: dx, s: ds, theta: dtheta })
}

pub fn qdense_backward<F: Real>(x: &QVector<F>, kernel: &QDenseKernel<F>, grad_out: &QVector<F>) -> Result<QDenseGrads<F>> {
    qdense_backward_cached(x, kernel, grad_out, &QDenseCache::new(kernel))
}

/// Real dense parameters, `[out][in]` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealDenseKernel<F> {
    pub w: Vec<F>,
    pub out_len: usize,
    pub in_len: usize,
}

impl<F: Real> RealDenseKernel<F> {
    pub fn zeros(out_len: usize, in_len: usize) -> Self {
        RealDenseKernel { w: vec![F::zero(); out_len * in_len], out_len, in_len }
    }

    pub fn from_weights(out_len: usize, in_len: usize, w: Vec<F>) -> Result<Self> {
        if w.len() != out_len * in_len {
            return Err(Error::shape(format!(
                "dense kernel ({out_len},{in_len}) needs {} weights, got {}",
                out_len * in_len,
                w.len()
            )));
        }
        Ok(RealDenseKernel { w, out_len, in_len })
    }
}

#[derive(Clone, Debug)]
pub struct RealDenseGrads<F> {
    pub input: Vec<F>,
    pub w: Vec<F>,
}

pub fn real_dense_forward<F: Real>(x: &[F], kernel: &RealDenseKernel<F>) -> Result<Vec<F>> {
    if x.len() != kernel.in_len {
        return Err(Error::shape(format!(
            "input vector has {} values, kernel expects {}",
            x.len(),
            kernel.in_len
        )));
    }
    let mut out = vec![F::zero(); kernel.out_len];
    F::gemm(kernel.out_len, kernel.in_len, 1, F::one(), &kernel.w, x, F::zero(), &mut out);
    Ok(out)
}

pub fn real_dense_backward<F: Real>(x: &[F], kernel: &RealDenseKernel<F>, grad_out: &[F]) -> Result<RealDenseGrads<F>> {
    if x.len() != kernel.in_len || grad_out.len() != kernel.out_len {
        return Err(Error::shape("dense backward shapes do not match kernel".to_string()));
    }
    let mut dw = vec![F::zero(); kernel.w.len()];
    for m in 0..kernel.out_len {
        let g = grad_out[m];
        let row = &mut dw[m * kernel.in_len..(m + 1) * kernel.in_len];
        for (wi, &xi) in row.iter_mut().zip(x) {
            *wi = g * xi;
        }
    }
    let mut dx = vec![F::zero(); kernel.in_len];
    F::gemm_tn(kernel.in_len, kernel.out_len, 1, F::one(), &kernel.w, grad_out, F::zero(), &mut dx);
    Ok(RealDenseGrads { input: dx, w: dw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{apply_color_rotation, ColorVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn qdense_matches_per_tap_rotation_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let (m_n, n_n) = (4, 7);
        let kern = QDenseKernel::from_parts(
            m_n, n_n,
            (0..m_n * n_n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..m_n * n_n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        )
        .unwrap();
        let mut x = QVector::<f64>::zeros(n_n);
        for n in 0..n_n {
            x.set(n, [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
        }
        let y = qdense_forward(&x, &kern).unwrap();
        for m in 0..m_n {
            let mut acc = [0.0f64; 3];
            for n in 0..n_n {
                let t = m * n_n + n;
                let r = apply_color_rotation(kern.s[t], kern.theta[t], ColorVector::from_array(x.get(n)));
                acc[0] += r.r;
                acc[1] += r.g;
                acc[2] += r.b;
            }
            let got = y.get(m);
            for i in 0..3 {
                assert!((got[i] - acc[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qdense_shape_checks() {
        let kern = QDenseKernel::<f64>::zeros(3, 5);
        let x = QVector::<f64>::zeros(4);
        assert!(qdense_forward(&x, &kern).is_err());
        let x5 = QVector::<f64>::zeros(5);
        let bad_g = QVector::<f64>::zeros(2);
        assert!(qdense_backward(&x5, &kern, &bad_g).is_err());
    }

    #[test]
    fn real_dense_is_matrix_vector_product() {
        let kern = RealDenseKernel::from_weights(2, 3, vec![1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = real_dense_forward(&[1.0, 0.5, -1.0], &kern).unwrap();
        assert!((y[0] - (1.0 + 1.0 - 3.0)).abs() < 1e-15);
        assert!((y[1] - (4.0 + 2.5 - 6.0)).abs() < 1e-15);
    }

    #[test]
    fn real_dense_backward_outer_product() {
        let kern = RealDenseKernel::from_weights(2, 2, vec![1.0f64, -1.0, 0.5, 2.0]).unwrap();
        let g = real_dense_backward(&[3.0, 4.0], &kern, &[1.0, -2.0]).unwrap();
        assert_eq!(g.w, vec![3.0, 4.0, -6.0, -8.0]);
        // dx = W^T g.
        assert!((g.input[0] - (1.0 - 1.0)).abs() < 1e-15);
        assert!((g.input[1] - (-1.0 - 4.0)).abs() < 1e-15);
    }
}
