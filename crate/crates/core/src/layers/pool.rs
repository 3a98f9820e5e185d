//! Spatial pooling over plane stacks. Quaternion maps pool per part plane,
//! so the three parts of an output element may come from different input
//! sites under max pooling; that is intentional and matches treating each
//! part as an independent real plane.

use crate::error::{Error, Result};
use crate::num::Real;

/// Where each max came from, for routing gradients back. One entry per
/// output cell per plane, holding the flat input index that won.
#[derive(Clone, Debug)]
pub struct PoolRouting {
    pub argmax: Vec<u32>,
    pub ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn check_pool(h: usize, w: usize, window: usize, stride: usize) -> Result<(usize, usize)> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid("pool window and stride must be at least 1"));
    }
    if h < window || w < window {
        return Err(Error::shape(format!(
            "{window}x{window} pool does not fit {h}x{w} input"
        )));
    }
    if (h - window) % stride != 0 || (w - window) % stride != 0 {
        return Err(Error::shape(format!(
            "pool window {window} stride {stride} does not tile {h}x{w} exactly"
        )));
    }
    Ok(((h - window) / stride + 1, (w - window) / stride + 1))
}

/// Max pool each plane. Ties break to the first cell in row-major scan
/// order, which keeps results deterministic.
pub fn maxpool_planes<F: Real>(
    planes: &[F],
    ch: usize,
    h: usize,
    w: usize,
    window: usize,
    stride: usize,
) -> Result<(Vec<F>, PoolRouting)> {
    let (out_h, out_w) = check_pool(h, w, window, stride)?;
    let mut out = vec![F::zero(); ch * out_h * out_w];
    let mut argmax = vec![0u32; ch * out_h * out_w];
    for c in 0..ch {
        let plane = &planes[c * h * w..(c + 1) * h * w];
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut best = F::neg_infinity();
                let mut best_i = 0usize;
                for ky in 0..window {
                    for kx in 0..window {
                        let i = (oy * stride + ky) * w + ox * stride + kx;
                        if plane[i] > best {
                            best = plane[i];
                            best_i = i;
                        }
                    }
                }
                let o = (c * out_h + oy) * out_w + ox;
                out[o] = best;
                argmax[o] = (c * h * w + best_i) as u32;
            }
        }
    }
    Ok((out, PoolRouting { argmax, ch, in_h: h, in_w: w, out_h, out_w }))
}

/// Scatter gradients to the recorded argmax sites.
pub fn maxpool_backward_planes<F: Real>(routing: &PoolRouting, grad_out: &[F]) -> Result<Vec<F>> {
    if grad_out.len() != routing.argmax.len() {
        return Err(Error::shape(format!(
            "pool gradient has {} values, routing expects {}",
            grad_out.len(),
            routing.argmax.len()
        )));
    }
    let mut dx = vec![F::zero(); routing.ch * routing.in_h * routing.in_w];
    for (o, &src) in routing.argmax.iter().enumerate() {
        dx[src as usize] += grad_out[o];
    }
    Ok(dx)
}

/// Average pool each plane.
pub fn avgpool_planes<F: Real>(
    planes: &[F],
    ch: usize,
    h: usize,
    w: usize,
    window: usize,
    stride: usize,
) -> Result<(Vec<F>, usize, usize)> {
    let (out_h, out_w) = check_pool(h, w, window, stride)?;
    let inv = F::one() / F::from_f64((window * window) as f64);
    let mut out = vec![F::zero(); ch * out_h * out_w];
    for c in 0..ch {
        let plane = &planes[c * h * w..(c + 1) * h * w];
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = F::zero();
                for ky in 0..window {
                    for kx in 0..window {
                        acc += plane[(oy * stride + ky) * w + ox * stride + kx];
                    }
                }
                out[(c * out_h + oy) * out_w + ox] = acc * inv;
            }
        }
    }
    Ok((out, out_h, out_w))
}

/// Spread each output gradient uniformly over its window.
#[allow(clippy::too_many_arguments)]
pub fn avgpool_backward_planes<F: Real>(
    grad_out: &[F],
    ch: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    window: usize,
    stride: usize,
) -> Vec<F> {
    let inv = F::one() / F::from_f64((window * window) as f64);
    let mut dx = vec![F::zero(); ch * in_h * in_w];
    for c in 0..ch {
        let plane = &mut dx[c * in_h * in_w..(c + 1) * in_h * in_w];
        for oy in 0..out_h {
            for ox in 0..out_w {
                let g = grad_out[(c * out_h + oy) * out_w + ox] * inv;
                for ky in 0..window {
                    for kx in 0..window {
                        plane[(oy * stride + ky) * in_w + ox * stride + kx] += g;
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxpool_picks_window_maxima() {
        let x = vec![
            1.0f64, 5.0, 2.0, 0.0,
            3.0, 4.0, 1.0, 1.0,
            0.0, 0.0, 9.0, 8.0,
            0.0, 0.0, 7.0, 9.0,
        ];
        let (y, routing) = maxpool_planes(&x, 1, 4, 4, 2, 2).unwrap();
        assert_eq!(y, vec![5.0, 2.0, 0.0, 9.0]);
        // Tie in the bottom-right window resolves to the first site scanned.
        assert_eq!(routing.argmax[3], 10);
    }

    #[test]
    fn maxpool_routes_gradients_to_argmax() {
        let x = vec![
            1.0f64, 5.0, 2.0, 0.0,
            3.0, 4.0, 1.0, 1.0,
            0.0, 0.0, 9.0, 8.0,
            0.0, 0.0, 7.0, 9.0,
        ];
        let (_, routing) = maxpool_planes(&x, 1, 4, 4, 2, 2).unwrap();
        let dx = maxpool_backward_planes(&routing, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut want = vec![0.0; 16];
        want[1] = 1.0; // 5.0
        want[2] = 2.0; // 2.0
        want[8] = 3.0; // first 0.0 in the bottom-left window
        want[10] = 4.0; // 9.0 tie, first wins
        assert_eq!(dx, want);
    }

    #[test]
    fn avgpool_and_backward_are_uniform() {
        let x = vec![1.0f64, 2.0, 3.0, 4.0];
        let (y, oh, ow) = avgpool_planes(&x, 1, 2, 2, 2, 2).unwrap();
        assert_eq!((oh, ow), (1, 1));
        assert!((y[0] - 2.5).abs() < 1e-15);
        let dx = avgpool_backward_planes(&[4.0], 1, 2, 2, 1, 1, 2, 2);
        assert_eq!(dx, vec![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn pool_requires_exact_tiling() {
        let x = vec![0.0f64; 25];
        assert!(maxpool_planes(&x, 1, 5, 5, 2, 2).is_err());
        assert!(avgpool_planes(&x, 1, 5, 5, 2, 2).is_err());
        let tiny = vec![0.0f64; 1];
        assert!(maxpool_planes(&tiny, 1, 1, 1, 2, 2).is_err());
    }
}
