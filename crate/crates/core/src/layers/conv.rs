//! Quaternion and real 2D convolutions, plus their transposed forms.
//!
//! A quaternion convolution never touches quaternion arithmetic at runtime.
//! Each tap (s, theta) contributes the 3x3 block s * R(theta) to an expanded
//! real weight matrix A of shape (3K, 3C*L*L); the part planes of the input
//! go through `im2col` and one GEMM produces all output parts at once. The
//! gradient identities fall out of the same structure:
//!
//! * input gradient: A^T routed back through `col2im` (each tap applies the
//!   transposed, i.e. inverse, rotation),
//! * ds for a tap: Frobenius inner product of its dA block with R(theta),
//! * dtheta: s times the inner product with dR/dtheta.
//!
//! where dA = grad_out @ patches^T is shared with the real case.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::qtensor::{QFeatureMap, RealFeatureMap};
use crate::quat::{rotation_coeffs, rotation_coeffs_deriv, RotationCoeffs};
use super::im2col::{col2im, conv_geometry, im2col, tconv_geometry, zero_insert, ConvGeom};
use super::ConvConfig;

/// Parameters of a quaternion convolution: per tap a scale `s` and a gray-axis
/// angle `theta`, laid out `[out_channel][in_channel][ky][kx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QConvKernel<F> {
    pub s: Vec<F>,
    pub theta: Vec<F>,
    pub out_channels: usize,
    pub in_channels: usize,
    pub ksize: usize,
}

impl<F: Real> QConvKernel<F> {
    pub fn zeros(out_channels: usize, in_channels: usize, ksize: usize) -> Self {
        let n = out_channels * in_channels * ksize * ksize;
        QConvKernel { s: vec![F::zero(); n], theta: vec![F::zero(); n], out_channels, in_channels, ksize }
    }

    pub fn from_parts(out_channels: usize, in_channels: usize, ksize: usize, s: Vec<F>, theta: Vec<F>) -> Result<Self> {
        let n = out_channels * in_channels * ksize * ksize;
        if s.len() != n || theta.len() != n {
            return Err(Error::shape(format!(
                "kernel ({out_channels},{in_channels},{ksize},{ksize}) needs {n} taps, got s={} theta={}",
                s.len(),
                theta.len()
            )));
        }
        Ok(QConvKernel { s, theta, out_channels, in_channels, ksize, })
    }

    #[inline]
    pub fn tap(&self, k: usize, c: usize, ky: usize, kx: usize) -> usize {
        ((k * self.in_channels + c) * self.ksize + ky) * self.ksize + kx
    }

    pub fn num_taps(&self) -> usize {
        self.s.len()
    }
}

/// Parameters of a plain real convolution, laid out like [`QConvKernel`].
#[derive(Clone, Debug, PartialEq)]
pub struct RealConvKernel<F> {
    pub w: Vec<F>,
    pub out_channels: usize,
    pub in_channels: usize,
    pub ksize: usize,
}

impl<F: Real> RealConvKernel<F> {
    pub fn zeros(out_channels: usize, in_channels: usize, ksize: usize) -> Self {
        RealConvKernel { w: vec![F::zero(); out_channels * in_channels * ksize * ksize], out_channels, in_channels, ksize }
    }

    pub fn from_weights(out_channels: usize, in_channels: usize, ksize: usize, w: Vec<F>) -> Result<Self> {
        let n = out_channels * in_channels * ksize * ksize;
        if w.len() != n {
            return Err(Error::shape(format!(
                "kernel ({out_channels},{in_channels},{ksize},{ksize}) needs {n} weights, got {}",
                w.len()
            )));
        }
        Ok(RealConvKernel { w, out_channels, in_channels, ksize })
    }
}

/// Per-tap rotation tables and the expanded weight matrix for one kernel.
/// Rebuild after every parameter update; reuse across a batch. `flipped`
/// selects the spatially reversed tap order transposed convolutions use.
#[derive(Clone, Debug)]
pub struct QConvCache<F> {
    pub a: Vec<F>,
    co: Vec<RotationCoeffs<F>>,
    dco: Vec<RotationCoeffs<F>>,
    flipped: bool,
}

impl<F: Real> QConvCache<F> {
    pub fn new(kernel: &QConvKernel<F>) -> Self {
        Self::build(kernel, false)
    }

    pub fn new_flipped(kernel: &QConvKernel<F>) -> Self {
        Self::build(kernel, true)
    }

    fn build(kernel: &QConvKernel<F>, flipped: bool) -> Self {
        let (k_n, c_n, l) = (kernel.out_channels, kernel.in_channels, kernel.ksize);
        let co: Vec<_> = kernel.theta.iter().map(|&t| rotation_coeffs(t)).collect();
        let dco: Vec<_> = kernel.theta.iter().map(|&t| rotation_coeffs_deriv(t)).collect();
        let acols = 3 * c_n * l * l;
        let mut a = vec![F::zero(); 3 * k_n * acols];
        for k in 0..k_n {
            for c in 0..c_n {
                for ky in 0..l {
                    for kx in 0..l {
                        let t = kernel.tap(k, c, ky, kx);
                        let (ay, ax) = if flipped { (l - 1 - ky, l - 1 - kx) } else { (ky, kx) };
                        let s = kernel.s[t];
                        let rows = co[t].rows();
                        for u in 0..3 {
                            let arow = &mut a[(3 * k + u) * acols..(3 * k + u + 1) * acols];
                            for v in 0..3 {
                                arow[((3 * c + v) * l + ay) * l + ax] = s * rows[u][v];
                            }
                        }
                    }
                }
            }
        }
        QConvCache { a, co, dco, flipped }
    }

    /// Reduce the shared dA matrix to per-tap (ds, dtheta).
    fn reduce_taps(&self, kernel: &QConvKernel<F>, da: &[F]) -> (Vec<F>, Vec<F>) {
        let (k_n, c_n, l) = (kernel.out_channels, kernel.in_channels, kernel.ksize);
        let acols = 3 * c_n * l * l;
        let mut ds = vec![F::zero(); kernel.num_taps()];
        let mut dtheta = vec![F::zero(); kernel.num_taps()];
        for k in 0..k_n {
            for c in 0..c_n {
                for ky in 0..l {
                    for kx in 0..l {
                        let t = kernel.tap(k, c, ky, kx);
                        let (ay, ax) = if self.flipped { (l - 1 - ky, l - 1 - kx) } else { (ky, kx) };
                        let m = self.co[t].rows();
                        let dm = self.dco[t].rows();
                        let mut acc_s = F::zero();
                        let mut acc_t = F::zero();
                        for u in 0..3 {
                            let arow = &da[(3 * k + u) * acols..(3 * k + u + 1) * acols];
                            for v in 0..3 {
                                let g = arow[((3 * c + v) * l + ay) * l + ax];
                                acc_s += g * m[u][v];
                                acc_t += g * dm[u][v];
                            }
                        }
                        ds[t] = acc_s;
                        dtheta[t] = kernel.s[t] * acc_t;
                    }
                }
            }
        }
        (ds, dtheta)
    }
}

/// Gradients of a quaternion convolution; `s`/`theta` index like the kernel.
#[derive(Clone, Debug)]
pub struct QConvGrads<F> {
    pub input: QFeatureMap<F>,
    pub s: Vec<F>,
    pub theta: Vec<F>,
}

/// Gradients of a real convolution.
#[derive(Clone, Debug)]
pub struct RealConvGrads<F> {
    pub input: RealFeatureMap<F>,
    pub w: Vec<F>,
}

fn check_qconv_input<F: Real>(x: &QFeatureMap<F>, kernel: &QConvKernel<F>) -> Result<()> {
    if x.channels() != kernel.in_channels {
        return Err(Error::shape(format!(
            "input has {} quaternion channels, kernel expects {}",
            x.channels(),
            kernel.in_channels
        )));
    }
    Ok(())
}

/// Engine shared by every convolution here: `out = A @ im2col(planes)`.
fn conv_forward_planes<F: Real>(planes: &[F], ch: usize, a: &[F], out_rows: usize, g: &ConvGeom) -> Vec<F> {
    let b = im2col(planes, ch, g);
    let kk = ch * g.ksize * g.ksize;
    let cols = g.out_h * g.out_w;
    let mut out = vec![F::zero(); out_rows * cols];
    F::gemm(out_rows, kk, cols, F::one(), a, &b, F::zero(), &mut out);
    out
}

/// Shared backward: dA = G @ B^T and the input gradient col2im(A^T @ G).
fn conv_backward_planes<F: Real>(
    planes: &[F],
    ch: usize,
    a: &[F],
    out_rows: usize,
    g: &ConvGeom,
    grad_out: &[F],
) -> (Vec<F>, Vec<F>) {
    let b = im2col(planes, ch, g);
    let kk = ch * g.ksize * g.ksize;
    let cols = g.out_h * g.out_w;
    let mut da = vec![F::zero(); out_rows * kk];
    F::gemm_nt(out_rows, cols, kk, F::one(), grad_out, &b, F::zero(), &mut da);
    let mut db = vec![F::zero(); kk * cols];
    F::gemm_tn(kk, out_rows, cols, F::one(), a, grad_out, F::zero(), &mut db);
    let dplanes = col2im(&db, ch, g);
    (da, dplanes)
}

/// Quaternion convolution with a prebuilt cache.
pub fn qconv2d_forward_cached<F: Real>(
    x: &QFeatureMap<F>,
    kernel: &QConvKernel<F>,
    cfg: &ConvConfig,
    cache: &QConvCache<F>,
) -> Result<QFeatureMap<F>> {
    check_qconv_input(x, kernel)?;
    let g = conv_geometry(x.height(), x.width(), kernel.ksize, cfg.stride, cfg.padding)?;
    let out = conv_forward_planes(x.as_slice(), 3 * x.channels(), &cache.a, 3 * kernel.out_channels, &g);
    QFeatureMap::from_vec(kernel.out_channels, g.out_h, g.out_w, out)
}

/// Quaternion convolution of a C-channel map into K channels.
pub fn qconv2d_forward<F: Real>(x: &QFeatureMap<F>, kernel: &QConvKernel<F>, cfg: &ConvConfig) -> Result<QFeatureMap<F>> {
    qconv2d_forward_cached(x, kernel, cfg, &QConvCache::new(kernel))
}

/// Backward pass with a prebuilt cache; `grad_out` must have the forward
/// output's shape.
pub fn qconv2d_backward_cached<F: Real>(
    x: &QFeatureMap<F>,
    kernel: &QConvKernel<F>,
    cfg: &ConvConfig,
    grad_out: &QFeatureMap<F>,
    cache: &QConvCache<F>,
) -> Result<QConvGrads<F>> {
    check_qconv_input(x, kernel)?;
    let g = conv_geometry(x.height(), x.width(), kernel.ksize, cfg.stride, cfg.padding)?;
    if grad_out.channels() != kernel.out_channels || grad_out.height() != g.out_h || grad_out.width() != g.out_w {
        return Err(Error::shape(format!(
            "gradient shape ({},{},{}) does not match conv output ({},{},{})",
            grad_out.channels(), grad_out.height(), grad_out.width(),
            kernel.out_channels, g.out_h, g.out_w
        )));
    }
    let (da, dplanes) = conv_backward_planes(
        x.as_slice(),
        3 * x.channels(),
        &cache.a,
        3 * kernel.out_channels,
        &g,
        grad_out.as_slice(),
    );
    let (ds, dtheta) = cache.reduce_taps(kernel, &da);
    Ok(QConvGrads {
        input: QFeatureMap::from_vec(x.channels(), x.height(), x.width(), dplanes)?,
        s: ds,
        theta: dtheta,
    })
}

pub fn qconv2d_backward<F: Real>(
    x: &QFeatureMap<F>,
    kernel: &QConvKernel<F>,
    cfg: &ConvConfig,
    grad_out: &QFeatureMap<F>,
) -> Result<QConvGrads<F>> {
    qconv2d_backward_cached(x, kernel, cfg, grad_out, &QConvCache::new(kernel))
}

/// Transposed quaternion convolution: zero-insert by the stride, then run a
/// stride-1 convolution with the spatially flipped kernel. With `Same`
/// padding the output is `stride * input`; with `Valid` it is
/// `(input-1)*stride + ksize`. For any kernel, `<qconv2d(x, k), y> =
/// <x, qconv_transpose2d(y, k')>` where `k'` shares `s` and negates `theta`.
pub fn qconv_transpose2d_forward_cached<F: Real>(
    x: &QFeatureMap<F>,
    kernel: &QConvKernel<F>,
    cfg: &ConvConfig,
    cache: &QConvCache<F>,
) -> Result<QFeatureMap<F>> {
    check_qconv_input(x, kernel)?;
    let g = tconv_geometry(x.height(), x.width(), kernel.ksize, cfg.stride, cfg.padding)?;
    let (up, _, _) = zero_insert(x.as_slice(), 3 * x.channels(), x.height(), x.width(), cfg.stride);
    let out = conv_forward_planes(&up, 3 * x.channels(), &cache.a, 3 * kernel.out_channels, &g);
    QFeatureMap::from_vec(kernel.out_channels, g.out_h, g.out_w, out)
}

pub fn qconv_transpose2d_forward<F: Real>(x: &QFeatureMap<F>, kernel: &QConvKernel<F>, cfg: &ConvConfig) -> Result<QFeatureMap<F>> {
    qconv_transpose2d_forward_cached(x, kernel, cfg, &QConvCache::new_flipped(kernel))
}

pub fn qconv_transpose2d_backward_cached<F: Real>(
    x: &QFeatureMap<F>,
    kernel: &QConvKernel<F>,
    cfg: &ConvConfig,
    grad_out: &QFeatureMap<F>,
    cache: &QConvCache<F>,
) -> Result<QConvGrads<F>> {
    check_qconv_input(x, kernel)?;
    let g = tconv_geometry(x.height(), x.width(), kernel.ksize, cfg.stride, cfg.padding)?;
    if grad_out.channels() != kernel.out_channels || grad_out.height() != g.out_h || grad_out.width() != g.out_w {
        return Err(Error::shape(format!(
            "gradient shape ({},{},{}) does not match transposed conv output ({},{},{})",
            grad_out.channels(), grad_out.height(), grad_out.width(),
            kernel.out_channels, g.out_h, g.out_w
        )));
    }
    let ch = 3 * x.channels();
    let (up, uh, uw) = zero_insert(x.as_slice(), ch, x.height(), x.width(), cfg.stride);
    let (da, dup) = conv_backward_planes(&up, ch, &cache.a, 3 * kernel.out_channels, &g, grad_out.as_slice());
    let (ds, dtheta) = cache.reduce_taps(kernel, &da);
    // Only positions that carried input samples receive gradient.
    let mut dplanes = vec![F::zero(); ch * x.height() * x.width()];
    for c in 0..ch {
        for y in 0..x.height() {
            for xx in 0..x.width() {
                dplanes[(c * x.height() + y) * x.width() + xx] =
                    dup[(c * uh + y * cfg.stride) * uw + xx * cfg.stride];
            }
        }
    }
    Ok(QConvGrads {
        input: QFeatureMap::from_vec(x.channels(), x.height(), x.width(), dplanes)?,
        s: ds,
        theta: dtheta,
    })
}

pub fn qconv_transpose2d_backward<F: Real>(
    x: &QFeatureMap<F>,
    kernel: &QConvKernel<F>,
    cfg: &ConvConfig,
    grad_out: &QFeatureMap<F>,
) -> Result<QConvGrads<F>> {
    qconv_transpose2d_backward_cached(x, kernel, cfg, grad_out, &QConvCache::new_flipped(kernel))
}

fn check_real_input<F: Real>(x: &RealFeatureMap<F>, kernel: &RealConvKernel<F>) -> Result<()> {
    if x.channels() != kernel.in_channels {
        return Err(Error::shape(format!(
            "input has {} planes, kernel expects {}",
            x.channels(),
            kernel.in_channels
        )));
    }
    Ok(())
}

fn flip_weights<F: Real>(kernel: &RealConvKernel<F>) -> Vec<F> {
    let (k_n, c_n, l) = (kernel.out_channels, kernel.in_channels, kernel.ksize);
    let mut a = vec![F::zero(); kernel.w.len()];
    for k in 0..k_n {
        for c in 0..c_n {
            for ky in 0..l {
                for kx in 0..l {
                    a[((k * c_n + c) * l + l - 1 - ky) * l + l - 1 - kx] =
                        kernel.w[((k * c_n + c) * l + ky) * l + kx];
                }
            }
        }
    }
    a
}

/// Real convolution; the baseline counterpart of [`qconv2d_forward`]. The
/// weight layout is already the expanded GEMM matrix (K, C*L*L).
pub fn real_conv2d_forward<F: Real>(x: &RealFeatureMap<F>, kernel: &RealConvKernel<F>, cfg: &ConvConfig) -> Result<RealFeatureMap<F>> {
    check_real_input(x, kernel)?;
    let g = conv_geometry(x.height(), x.width(), kernel.ksize, cfg.stride, cfg.padding)?;
    let out = conv_forward_planes(x.as_slice(), x.channels(), &kernel.w, kernel.out_channels, &g);
    RealFeatureMap::from_vec(kernel.out_channels, g.out_h, g.out_w, out)
}

pub fn real_conv2d_backward<F: Real>(
    x: &RealFeatureMap<F>,
    kernel: &RealConvKernel<F>,
    cfg: &ConvConfig,
    grad_out: &RealFeatureMap<F>,
) -> Result<RealConvGrads<F>> {
    check_real_input(x, kernel)?;
    let g = conv_geometry(x.height(), x.width(), kernel.ksize, cfg.stride, cfg.padding)?;
    if grad_out.channels() != kernel.out_channels || grad_out.height() != g.out_h || grad_out.width() != g.out_w {
        return Err(Error::shape("gradient shape does not match conv output".to_string()));
    }
    let (da, dplanes) = conv_backward_planes(x.as_slice(), x.channels(), &kernel.w, kernel.out_channels, &g, grad_out.as_slice());
    Ok(RealConvGrads {
        input: RealFeatureMap::from_vec(x.channels(), x.height(), x.width(), dplanes)?,
        w: da,
    })
}

/// Real transposed convolution; mirrors the quaternion one.
pub fn real_conv_transpose2d_forward<F: Real>(
    x: &RealFeatureMap<F>,
    kernel: &RealConvKernel<F>,
    cfg: &ConvConfig,
) -> Result<RealFeatureMap<F>> {
    check_real_input(x, kernel)?;
    let g = tconv_geometry(x.height(), x.width(), kernel.ksize, cfg.stride, cfg.padding)?;
    let (up, _, _) = zero_insert(x.as_slice(), x.channels(), x.height(), x.width(), cfg.stride);
    let a = flip_weights(kernel);
    let out = conv_forward_planes(&up, x.channels(), &a, kernel.out_channels, &g);
    RealFeatureMap::from_vec(kernel.out_channels, g.out_h, g.out_w, out)
}

pub fn real_conv_transpose2d_backward<F: Real>(
    x: &RealFeatureMap<F>,
    kernel: &RealConvKernel<F>,
    cfg: &ConvConfig,
    grad_out: &RealFeatureMap<F>,
) -> Result<RealConvGrads<F>> {
    check_real_input(x, kernel)?;
    let g = tconv_geometry(x.height(), x.width(), kernel.ksize, cfg.stride, cfg.padding)?;
    if grad_out.channels() != kernel.out_channels || grad_out.height() != g.out_h || grad_out.width() != g.out_w {
        return Err(Error::shape("gradient shape does not match transposed conv output".to_string()));
    }
    let ch = x.channels();
    let (up, uh, uw) = zero_insert(x.as_slice(), ch, x.height(), x.width(), cfg.stride);
    let a = flip_weights(kernel);
    let (da_flipped, dup) = conv_backward_planes(&up, ch, &a, kernel.out_channels, &g, grad_out.as_slice());
    // Unflip the weight gradient back to kernel orientation.
    let grad_kernel = flip_weights(&RealConvKernel {
        w: da_flipped,
        out_channels: kernel.out_channels,
        in_channels: kernel.in_channels,
        ksize: kernel.ksize,
    });
    let mut dplanes = vec![F::zero(); ch * x.height() * x.width()];
    for c in 0..ch {
        for y in 0..x.height() {
            for xx in 0..x.width() {
                dplanes[(c * x.height() + y) * x.width() + xx] =
                    dup[(c * uh + y * cfg.stride) * uw + xx * cfg.stride];
            }
        }
    }
    Ok(RealConvGrads {
        input: RealFeatureMap::from_vec(ch, x.height(), x.width(), dplanes)?,
        w: grad_kernel,
    })
}
