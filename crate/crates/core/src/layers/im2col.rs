//! Patch lowering: convolutions run as one GEMM over an unrolled patch
//! matrix. `im2col` gathers every kernel window into a column; `col2im` is
//! its scatter-add adjoint, which is exactly what routing gradients back to
//! the input needs.

use crate::error::{Error, Result};
use crate::num::Real;
use super::Padding;

/// Resolved geometry of one convolution: where windows start and how big the
/// output is. `pad_top`/`pad_left` position the first window; everything out
/// of bounds reads as zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub ksize: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

/// Geometry for a forward convolution. `Same` keeps `out = ceil(in/stride)`
/// with the shortfall padded (extra pixel goes to the bottom/right); `Valid`
/// uses no padding and errors if the kernel does not fit.
pub fn conv_geometry(in_h: usize, in_w: usize, ksize: usize, stride: usize, padding: Padding) -> Result<ConvGeom> {
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if ksize == 0 {
        return Err(Error::invalid("kernel size must be at least 1"));
    }
    match padding {
        Padding::Valid => {
            if in_h < ksize || in_w < ksize {
                return Err(Error::shape(format!(
                    "{ksize}x{ksize} kernel does not fit {in_h}x{in_w} input without padding"
                )));
            }
            Ok(ConvGeom {
                in_h,
                in_w,
                ksize,
                stride,
                pad_top: 0,
                pad_left: 0,
                out_h: (in_h - ksize) / stride + 1,
                out_w: (in_w - ksize) / stride + 1,
            })
        }
        Padding::Same => {
            let out_h = in_h.div_ceil(stride);
            let out_w = in_w.div_ceil(stride);
            let pad_h = ((out_h - 1) * stride + ksize).saturating_sub(in_h);
            let pad_w = ((out_w - 1) * stride + ksize).saturating_sub(in_w);
            Ok(ConvGeom {
                in_h,
                in_w,
                ksize,
                stride,
                pad_top: pad_h / 2,
                pad_left: pad_w / 2,
                out_h,
                out_w,
            })
        }
    }
}

/// Unroll `ch` planes into the patch matrix: row `(c*k + ky)*k + kx`, column
/// `oy*out_w + ox`, value `planes[c][oy*stride + ky - pad_top][...]`, zero
/// outside the input.
pub fn im2col<F: Real>(planes: &[F], ch: usize, g: &ConvGeom) -> Vec<F> {
    debug_assert_eq!(planes.len(), ch * g.in_h * g.in_w);
    let k = g.ksize;
    let cols = g.out_h * g.out_w;
    let mut out = vec![F::zero(); ch * k * k * cols];
    for c in 0..ch {
        let plane = &planes[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut out[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    let dst_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                        if ix >= 0 && ix < g.in_w as isize {
                            dst_row[ox] = src_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Scatter-add adjoint of [`im2col`]: accumulates patch-matrix values back
/// onto the planes they were read from. Satisfies `<im2col(x), y> =
/// <x, col2im(y)>` for all `x`, `y`.
pub fn col2im<F: Real>(cols_mat: &[F], ch: usize, g: &ConvGeom) -> Vec<F> {
    let k = g.ksize;
    let cols = g.out_h * g.out_w;
    debug_assert_eq!(cols_mat.len(), ch * k * k * cols);
    let mut planes = vec![F::zero(); ch * g.in_h * g.in_w];
    for c in 0..ch {
        let plane = &mut planes[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols_mat[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad_top as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    let src_row = &src[oy * g.out_w..(oy + 1) * g.out_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - g.pad_left as isize;
                        if ix >= 0 && ix < g.in_w as isize {
                            dst_row[ix as usize] += src_row[ox];
                        }
                    }
                }
            }
        }
    }
    planes
}

/// Insert `stride - 1` zeros between neighboring samples of each plane;
/// output is `(h-1)*stride + 1` square. The first step of a transposed
/// convolution.
pub fn zero_insert<F: Real>(planes: &[F], ch: usize, h: usize, w: usize, stride: usize) -> (Vec<F>, usize, usize) {
    if stride == 1 {
        return (planes.to_vec(), h, w);
    }
    let uh = (h - 1) * stride + 1;
    let uw = (w - 1) * stride + 1;
    let mut out = vec![F::zero(); ch * uh * uw];
    for c in 0..ch {
        for y in 0..h {
            for x in 0..w {
                out[(c * uh + y * stride) * uw + x * stride] = planes[(c * h + y) * w + x];
            }
        }
    }
    (out, uh, uw)
}

/// Geometry of the stride-1 convolution a transposed convolution performs
/// over the zero-inserted input. `Same` produces `stride * in`, `Valid`
/// produces `(in-1)*stride + ksize`; padding offsets are chosen so the map is
/// the exact adjoint of the matching forward convolution.
pub fn tconv_geometry(in_h: usize, in_w: usize, ksize: usize, stride: usize, padding: Padding) -> Result<ConvGeom> {
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    let uh = (in_h - 1) * stride + 1;
    let uw = (in_w - 1) * stride + 1;
    let (out_h, out_w, pad_top, pad_left) = match padding {
        Padding::Valid => ((in_h - 1) * stride + ksize, (in_w - 1) * stride + ksize, ksize - 1, ksize - 1),
        Padding::Same => {
            // The matching forward conv maps stride*in -> in with shortfall
            // padding p at the top; its adjoint needs ksize-1-p here.
            let fwd_pad = ksize.saturating_sub(stride) / 2;
            (stride * in_h, stride * in_w, ksize - 1 - fwd_pad, ksize - 1 - fwd_pad)
        }
    };
    Ok(ConvGeom { in_h: uh, in_w: uw, ksize, stride: 1, pad_top, pad_left, out_h, out_w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_geometry_keeps_size_at_stride_one() {
        let g = conv_geometry(32, 32, 3, 1, Padding::Same).unwrap();
        assert_eq!((g.out_h, g.out_w, g.pad_top, g.pad_left), (32, 32, 1, 1));
        let g5 = conv_geometry(9, 9, 5, 1, Padding::Same).unwrap();
        assert_eq!((g5.out_h, g5.pad_top), (9, 2));
    }

    #[test]
    fn same_geometry_halves_at_stride_two() {
        let g = conv_geometry(64, 64, 3, 2, Padding::Same).unwrap();
        assert_eq!((g.out_h, g.out_w), (32, 32));
        // Shortfall of 1 pads only the bottom/right.
        assert_eq!((g.pad_top, g.pad_left), (0, 0));
    }

    #[test]
    fn valid_geometry_shrinks_and_rejects_oversize_kernels() {
        let g = conv_geometry(32, 32, 3, 1, Padding::Valid).unwrap();
        assert_eq!((g.out_h, g.out_w), (30, 30));
        assert!(conv_geometry(2, 2, 3, 1, Padding::Valid).is_err());
        assert!(conv_geometry(4, 4, 3, 0, Padding::Same).is_err());
    }

    #[test]
    fn im2col_gathers_expected_patches() {
        // 1 plane, 3x3 input, 2x2 kernel, valid stride 1: four 2x2 windows.
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        let g = conv_geometry(3, 3, 2, 1, Padding::Valid).unwrap();
        let b = im2col(&x, 1, &g);
        // Rows are kernel offsets (ky,kx); columns the four window positions.
        assert_eq!(b, vec![
            1.0, 2.0, 4.0, 5.0, // (0,0)
            2.0, 3.0, 5.0, 6.0, // (0,1)
            4.0, 5.0, 7.0, 8.0, // (1,0)
            5.0, 6.0, 8.0, 9.0, // (1,1)
        ]);
    }

    #[test]
    fn im2col_zero_fills_padding() {
        let x = vec![1.0f64, 2.0, 3.0, 4.0];
        let g = conv_geometry(2, 2, 3, 1, Padding::Same).unwrap();
        let b = im2col(&x, 1, &g);
        // Center tap row (ky=1,kx=1) reproduces the input.
        let cols = g.out_h * g.out_w;
        let center = 1 * 3 + 1;
        assert_eq!(&b[center * cols..(center + 1) * cols], &[1.0, 2.0, 3.0, 4.0]);
        // Top-left tap sees only zeros except at the bottom-right window.
        assert_eq!(&b[0..cols], &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &(h, w, k, stride, pad) in &[
            (5usize, 7usize, 3usize, 1usize, Padding::Same),
            (6, 6, 3, 2, Padding::Same),
            (8, 5, 2, 2, Padding::Valid),
            (4, 4, 3, 1, Padding::Valid),
        ] {
            let ch = 2;
            let g = conv_geometry(h, w, k, stride, pad).unwrap();
            let x: Vec<f64> = (0..ch * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..ch * k * k * g.out_h * g.out_w)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let bx = im2col(&x, ch, &g);
            let cy = col2im(&y, ch, &g);
            let lhs: f64 = bx.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&cy).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10, "h={h} w={w} k={k} stride={stride}");
        }
    }

    #[test]
    fn zero_insert_spaces_samples() {
        let x = vec![1.0f32, 2.0, 3.0, 4.0];
        let (up, uh, uw) = zero_insert(&x, 1, 2, 2, 2);
        assert_eq!((uh, uw), (3, 3));
        assert_eq!(up, vec![1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 4.0]);
    }

    #[test]
    fn tconv_geometry_sizes() {
        let g = tconv_geometry(32, 32, 3, 2, Padding::Same).unwrap();
        assert_eq!((g.out_h, g.out_w), (64, 64));
        assert_eq!((g.in_h, g.in_w), (63, 63));
        let gv = tconv_geometry(5, 5, 3, 2, Padding::Valid).unwrap();
        assert_eq!((gv.out_h, gv.out_w), (11, 11));
    }
}
