//! Numerical verification of the analytic machinery.
//!
//! Two independent lines of evidence, both in double precision:
//!
//! * Central finite differences against every backward path: small networks
//!   covering each layer kind are probed through a fixed random linear
//!   functional of the output, and every parameter (plus a sample of input
//!   coordinates) is perturbed by [`EPSILON`] both ways.
//! * A literal quaternion-arithmetic convolution — Hamilton sandwich per tap,
//!   no im2col, no GEMM, no precomputed rotation tables — compared against
//!   the production forward pass.
//!
//! ReLU and max-pool are not differentiable everywhere, so evaluation points
//! are redrawn until every pre-activation is clear of zero and every pooling
//! window has a clear winner.

use crate::error::Result;
use crate::layers::{self, ConvConfig, Padding, QConvKernel};
use crate::net::{rebuild_like, InputKind, LayerSpec, Network, NetworkSpec, Shape, SkipLink, Value};
use crate::qtensor::{QFeatureMap, RealFeatureMap};
use crate::quat::{self, Quaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step.
pub const EPSILON: f64 = 1e-5;
/// Largest acceptable relative disagreement for a derivative.
pub const TOLERANCE: f64 = 1e-4;
/// Redraw the input if a pre-activation or pooling margin is this close to a
/// decision boundary; finite differences would straddle the kink.
const KINK_MARGIN: f64 = 1e-3;

/// Outcome of one verification.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: String,
    /// Worst relative disagreement seen across all probes and seeds.
    pub max_err: f64,
    /// Tolerance the check was held to.
    pub tolerance: f64,
    /// Number of scalar comparisons behind the verdict.
    pub compared: usize,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: &str, max_err: f64, tolerance: f64, compared: usize) -> Self {
        CheckReport {
            name: name.to_string(),
            max_err,
            tolerance,
            compared,
            passed: max_err <= tolerance,
        }
    }
}

/// Relative error with an absolute floor so exact zeros (dead units, padded
/// taps) do not divide noise by noise.
fn grad_err(a: f64, b: f64) -> f64 {
    if a.abs() < 1e-7 && b.abs() < 1e-7 {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn probe(net: &mut Network<f64>, input: &Value<f64>, mask: &[f64]) -> Result<f64> {
    let t = net.forward(input)?;
    Ok(dot(t.output().as_slice(), mask))
}

fn random_input(spec: &NetworkSpec, rng: &mut impl Rng) -> Result<Value<f64>> {
    let n = spec.input_h * spec.input_w;
    match spec.input {
        InputKind::Quaternion { .. } => {
            let data = (0..3 * n).map(|_| rng.random_range(0.05..0.95)).collect();
            Ok(Value::QMap(QFeatureMap::from_vec(1, spec.input_h, spec.input_w, data)?))
        }
        InputKind::Real => {
            let data = (0..3 * n).map(|_| rng.random_range(0.05..0.95)).collect();
            Ok(Value::RMap(RealFeatureMap::from_vec(3, spec.input_h, spec.input_w, data)?))
        }
    }
}

fn plane_dims(shape: Shape) -> Option<(usize, usize, usize)> {
    match shape {
        Shape::QMap { c, h, w } => Some((3 * c, h, w)),
        Shape::RMap { c, h, w } => Some((c, h, w)),
        _ => None,
    }
}

/// True if any ReLU input sits near zero or any max-pool window is near a
/// tie, either of which would make a finite difference invalid.
fn near_kink(spec: &NetworkSpec, trace: &crate::net::Trace<f64>) -> bool {
    for (i, layer) in spec.layers.iter().enumerate() {
        if i == 0 {
            continue; // the nets below never open with relu or pooling
        }
        let x = trace.value(i - 1);
        match layer {
            LayerSpec::Relu => {
                if x.as_slice().iter().any(|v| v.abs() < KINK_MARGIN) {
                    return true;
                }
            }
            LayerSpec::MaxPool { window } => {
                let Some((ch, h, w)) = plane_dims(x.shape()) else { return true };
                let data = x.as_slice();
                for p in 0..ch {
                    let plane = &data[p * h * w..(p + 1) * h * w];
                    for ty in 0..h / window {
                        for tx in 0..w / window {
                            let mut top = f64::NEG_INFINITY;
                            let mut second = f64::NEG_INFINITY;
                            for dy in 0..*window {
                                for dx in 0..*window {
                                    let v = plane[(ty * window + dy) * w + tx * window + dx];
                                    if v > top {
                                        second = top;
                                        top = v;
                                    } else if v > second {
                                        second = v;
                                    }
                                }
                            }
                            if top - second < KINK_MARGIN {
                                return true;
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    false
}

fn draw_input(net: &mut Network<f64>, rng: &mut impl Rng) -> Result<Value<f64>> {
    let mut input = random_input(net.spec(), rng)?;
    for _ in 0..32 {
        let trace = net.forward(&input)?;
        if !near_kink(net.spec(), &trace) {
            break;
        }
        input = random_input(net.spec(), rng)?;
    }
    Ok(input)
}

fn set_param(net: &mut Network<f64>, li: usize, ai: usize, idx: usize, v: f64) {
    net.layer_params_mut()[li].arrays_mut()[ai][idx] = v;
    net.invalidate_caches();
}

/// Finite-difference every parameter of a network built from `spec` (and a
/// sample of input coordinates) against one analytic backward pass.
fn check_once(spec: &NetworkSpec, seed: u64) -> Result<(f64, usize)> {
    let mut net = Network::<f64>::build(spec.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 0x5bd1);
    let input = draw_input(&mut net, &mut rng)?;
    let trace = net.forward(&input)?;
    let mask: Vec<f64> =
        (0..trace.output().as_slice().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gout = rebuild_like(trace.output(), mask.clone())?;
    let (grads, gin) = net.backward(&trace, &gout)?;
    drop(trace);

    let mut max_err = 0.0f64;
    let mut compared = 0usize;
    for li in 0..net.spec().layers.len() {
        for ai in 0..net.layer_params()[li].arrays().len() {
            for idx in 0..net.layer_params()[li].arrays()[ai].len() {
                let orig = net.layer_params()[li].arrays()[ai][idx];
                set_param(&mut net, li, ai, idx, orig + EPSILON);
                let fp = probe(&mut net, &input, &mask)?;
                set_param(&mut net, li, ai, idx, orig - EPSILON);
                let fm = probe(&mut net, &input, &mask)?;
                set_param(&mut net, li, ai, idx, orig);
                let fd = (fp - fm) / (2.0 * EPSILON);
                max_err = max_err.max(grad_err(grads[li][ai][idx], fd));
                compared += 1;
            }
        }
    }

    let ilen = input.as_slice().len();
    for idx in rand::seq::index::sample(&mut rng, ilen, ilen.min(12)) {
        let mut xp = input.clone();
        xp.as_mut_slice()[idx] += EPSILON;
        let mut xm = input.clone();
        xm.as_mut_slice()[idx] -= EPSILON;
        let fd = (probe(&mut net, &xp, &mask)? - probe(&mut net, &xm, &mask)?) / (2.0 * EPSILON);
        max_err = max_err.max(grad_err(gin.as_slice()[idx], fd));
        compared += 1;
    }
    Ok((max_err, compared))
}

/// Run [`check_once`] under three seeds and keep the worst disagreement.
pub fn check_network(name: &str, spec: &NetworkSpec, seed: u64) -> Result<CheckReport> {
    let mut max_err = 0.0f64;
    let mut compared = 0;
    for s in 0..3 {
        let (e, n) = check_once(spec, seed + s)?;
        max_err = max_err.max(e);
        compared += n;
    }
    Ok(CheckReport::new(name, max_err, TOLERANCE, compared))
}

fn conv(out_channels: usize, ksize: usize, stride: usize, padding: Padding, quat: bool) -> LayerSpec {
    if quat {
        LayerSpec::QConv { out_channels, ksize, stride, padding }
    } else {
        LayerSpec::RealConv { out_channels, ksize, stride, padding }
    }
}

fn qspec(h: usize, w: usize, replicate: usize, layers: Vec<LayerSpec>, skips: Vec<SkipLink>) -> NetworkSpec {
    NetworkSpec {
        input: InputKind::Quaternion { replicate },
        input_h: h,
        input_w: w,
        layers,
        skips,
    }
}

fn rspec(h: usize, w: usize, layers: Vec<LayerSpec>) -> NetworkSpec {
    NetworkSpec { input: InputKind::Real, input_h: h, input_w: w, layers, skips: vec![] }
}

fn check_specs() -> Vec<(&'static str, NetworkSpec)> {
    vec![
        (
            "qconv-relu-maxpool-qdense",
            qspec(
                8,
                8,
                2,
                vec![
                    conv(2, 3, 1, Padding::Same, true),
                    LayerSpec::Relu,
                    LayerSpec::MaxPool { window: 2 },
                    conv(2, 3, 1, Padding::Valid, true),
                    LayerSpec::Relu,
                    LayerSpec::Flatten,
                    LayerSpec::QDense { out_len: 5 },
                    LayerSpec::Relu,
                    LayerSpec::RealDense { out_len: 3 },
                ],
                vec![],
            ),
        ),
        (
            "realconv-relu-maxpool-dense",
            rspec(
                8,
                8,
                vec![
                    conv(4, 3, 1, Padding::Same, false),
                    LayerSpec::Relu,
                    LayerSpec::MaxPool { window: 2 },
                    conv(3, 3, 1, Padding::Valid, false),
                    LayerSpec::Relu,
                    LayerSpec::Flatten,
                    LayerSpec::RealDense { out_len: 4 },
                ],
            ),
        ),
        (
            "strided-qconv-avgpool",
            qspec(
                8,
                8,
                1,
                vec![
                    conv(2, 3, 2, Padding::Same, true),
                    LayerSpec::Relu,
                    LayerSpec::AvgPool { window: 2 },
                    LayerSpec::Flatten,
                    LayerSpec::QDense { out_len: 4 },
                ],
                vec![],
            ),
        ),
        (
            "qconv-transpose-tanh",
            qspec(
                4,
                4,
                1,
                vec![
                    conv(2, 3, 1, Padding::Same, true),
                    LayerSpec::Tanh,
                    LayerSpec::QConvTranspose {
                        out_channels: 1,
                        ksize: 3,
                        stride: 2,
                        padding: Padding::Same,
                    },
                    LayerSpec::Tanh,
                ],
                vec![],
            ),
        ),
        (
            "realconv-transpose-valid",
            rspec(
                4,
                4,
                vec![
                    conv(2, 3, 1, Padding::Same, false),
                    LayerSpec::Tanh,
                    LayerSpec::RealConvTranspose {
                        out_channels: 3,
                        ksize: 3,
                        stride: 2,
                        padding: Padding::Valid,
                    },
                    LayerSpec::Tanh,
                ],
            ),
        ),
        (
            "skip-addition-replicated-input",
            qspec(
                6,
                6,
                2,
                vec![
                    conv(2, 3, 1, Padding::Same, true),
                    LayerSpec::Relu,
                    conv(2, 3, 1, Padding::Same, true),
                    LayerSpec::Relu,
                    conv(1, 3, 1, Padding::Same, true),
                    LayerSpec::Tanh,
                ],
                vec![SkipLink { from: 1, to: 3 }],
            ),
        ),
    ]
}

fn check_cross_entropy(seed: u64) -> CheckReport {
    let mut max_err = 0.0f64;
    let mut compared = 0;
    for s in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + s);
        let logits: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = rng.random_range(0..10);
        let (_, grad) = crate::training::softmax_cross_entropy(&logits, label).unwrap();
        for i in 0..logits.len() {
            let mut lp = logits.clone();
            lp[i] += EPSILON;
            let mut lm = logits.clone();
            lm[i] -= EPSILON;
            let (fp, _) = crate::training::softmax_cross_entropy(&lp, label).unwrap();
            let (fm, _) = crate::training::softmax_cross_entropy(&lm, label).unwrap();
            max_err = max_err.max(grad_err(grad[i], (fp - fm) / (2.0 * EPSILON)));
            compared += 1;
        }
    }
    CheckReport::new("softmax-cross-entropy", max_err, TOLERANCE, compared)
}

fn check_mse(seed: u64) -> CheckReport {
    let mut max_err = 0.0f64;
    let mut compared = 0;
    for s in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + s);
        let pred: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = crate::training::mse(&pred, &target).unwrap();
        for i in 0..pred.len() {
            let mut pp = pred.clone();
            pp[i] += EPSILON;
            let mut pm = pred.clone();
            pm[i] -= EPSILON;
            let (fp, _) = crate::training::mse(&pp, &target).unwrap();
            let (fm, _) = crate::training::mse(&pm, &target).unwrap();
            max_err = max_err.max(grad_err(grad[i], (fp - fm) / (2.0 * EPSILON)));
            compared += 1;
        }
    }
    CheckReport::new("mean-squared-error", max_err, TOLERANCE, compared)
}

/// Literal per-tap forward convolution: every contribution is the Hamilton
/// sandwich of a pure color quaternion, rotated about the gray axis and
/// scaled, summed in plain nested loops.
pub fn qconv_reference(
    x: &QFeatureMap<f64>,
    kernel: &QConvKernel<f64>,
    cfg: &ConvConfig,
) -> Result<QFeatureMap<f64>> {
    let (l, s) = (kernel.ksize, cfg.stride);
    let (in_h, in_w) = (x.height(), x.width());
    let (out_h, out_w, pad_top, pad_left) = match cfg.padding {
        Padding::Valid => ((in_h - l) / s + 1, (in_w - l) / s + 1, 0, 0),
        Padding::Same => {
            let oh = in_h.div_ceil(s);
            let ow = in_w.div_ceil(s);
            let ph = ((oh - 1) * s + l).saturating_sub(in_h);
            let pw = ((ow - 1) * s + l).saturating_sub(in_w);
            (oh, ow, ph / 2, pw / 2)
        }
    };
    let axis = quat::gray_axis::<f64>();
    let mut data = vec![0.0f64; kernel.out_channels * 3 * out_h * out_w];
    for k in 0..kernel.out_channels {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = [0.0f64; 3];
                for c in 0..kernel.in_channels {
                    for ky in 0..l {
                        for kx in 0..l {
                            let iy = (oy * s + ky) as i64 - pad_top as i64;
                            let ix = (ox * s + kx) as i64 - pad_left as i64;
                            if iy < 0 || ix < 0 || iy >= in_h as i64 || ix >= in_w as i64 {
                                continue;
                            }
                            let p = x.pixel(c, iy as usize, ix as usize);
                            let t = kernel.tap(k, c, ky, kx);
                            let r =
                                quat::rotate_about_axis(Quaternion::pure(p[0], p[1], p[2]), axis, kernel.theta[t])?
                                    .scaled(kernel.s[t])
                                    .vector();
                            for u in 0..3 {
                                acc[u] += r[u];
                            }
                        }
                    }
                }
                for u in 0..3 {
                    data[((3 * k + u) * out_h + oy) * out_w + ox] = acc[u];
                }
            }
        }
    }
    QFeatureMap::from_vec(kernel.out_channels, out_h, out_w, data)
}

/// Literal transposed counterpart of [`qconv_reference`]: each input pixel
/// scatters its rotated-and-scaled taps into the enlarged output.
pub fn qconv_transpose_reference(
    x: &QFeatureMap<f64>,
    kernel: &QConvKernel<f64>,
    cfg: &ConvConfig,
) -> Result<QFeatureMap<f64>> {
    let (l, s) = (kernel.ksize, cfg.stride);
    let (in_h, in_w) = (x.height(), x.width());
    let (out_h, out_w, pad) = match cfg.padding {
        Padding::Valid => ((in_h - 1) * s + l, (in_w - 1) * s + l, 0),
        Padding::Same => (in_h * s, in_w * s, l.saturating_sub(s) / 2),
    };
    let axis = quat::gray_axis::<f64>();
    let mut data = vec![0.0f64; kernel.out_channels * 3 * out_h * out_w];
    for k in 0..kernel.out_channels {
        for c in 0..kernel.in_channels {
            for y in 0..in_h {
                for x_ in 0..in_w {
                    let p = x.pixel(c, y, x_);
                    for ky in 0..l {
                        for kx in 0..l {
                            let oy = (y * s + ky) as i64 - pad as i64;
                            let ox = (x_ * s + kx) as i64 - pad as i64;
                            if oy < 0 || ox < 0 || oy >= out_h as i64 || ox >= out_w as i64 {
                                continue;
                            }
                            let t = kernel.tap(k, c, ky, kx);
                            let r =
                                quat::rotate_about_axis(Quaternion::pure(p[0], p[1], p[2]), axis, kernel.theta[t])?
                                    .scaled(kernel.s[t])
                                    .vector();
                            for u in 0..3 {
                                data[((3 * k + u) * out_h + oy as usize) * out_w + ox as usize] += r[u];
                            }
                        }
                    }
                }
            }
        }
    }
    QFeatureMap::from_vec(kernel.out_channels, out_h, out_w, data)
}

fn random_qconv(out_c: usize, in_c: usize, l: usize, rng: &mut impl Rng) -> QConvKernel<f64> {
    let taps = out_c * in_c * l * l;
    let s = (0..taps).map(|_| rng.random_range(-1.0..1.0)).collect();
    let theta = (0..taps)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    QConvKernel::from_parts(out_c, in_c, l, s, theta).unwrap()
}

fn random_qmap(c: usize, h: usize, w: usize, rng: &mut impl Rng) -> QFeatureMap<f64> {
    let data = (0..3 * c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    QFeatureMap::from_vec(c, h, w, data).unwrap()
}

fn max_rel_diff(a: &QFeatureMap<f64>, b: &QFeatureMap<f64>) -> f64 {
    let scale = a
        .as_slice()
        .iter()
        .chain(b.as_slice())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / scale))
}

fn check_engine_vs_reference(seed: u64, transpose: bool) -> Result<CheckReport> {
    let tol = 1e-10;
    let mut max_err = 0.0f64;
    let mut compared = 0;
    let configs = [
        ConvConfig { stride: 1, padding: Padding::Same },
        ConvConfig { stride: 1, padding: Padding::Valid },
        ConvConfig { stride: 2, padding: Padding::Same },
        ConvConfig { stride: 2, padding: Padding::Valid },
    ];
    for s in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000 * s);
        let x = random_qmap(2, 5, 6, &mut rng);
        let kernel = random_qconv(3, 2, 3, &mut rng);
        for cfg in &configs {
            let (engine, reference) = if transpose {
                (
                    layers::qconv_transpose2d_forward(&x, &kernel, cfg)?,
                    qconv_transpose_reference(&x, &kernel, cfg)?,
                )
            } else {
                (layers::qconv2d_forward(&x, &kernel, cfg)?, qconv_reference(&x, &kernel, cfg)?)
            };
            max_err = max_err.max(max_rel_diff(&engine, &reference));
            compared += engine.as_slice().len();
        }
    }
    let name = if transpose { "transpose-engine-vs-literal-quaternion" } else { "engine-vs-literal-quaternion" };
    Ok(CheckReport::new(name, max_err, tol, compared))
}

/// The full verification suite. Every backward path the network assembler can
/// emit is finite-differenced, both losses are finite-differenced, and the
/// GEMM convolution engine is compared against literal quaternion arithmetic.
pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (name, spec) in check_specs() {
        out.push(check_network(name, &spec, seed)?);
    }
    out.push(check_cross_entropy(seed));
    out.push(check_mse(seed));
    out.push(check_engine_vs_reference(seed, false)?);
    out.push(check_engine_vs_reference(seed, true)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_passes() {
        let reports = run_all(11).unwrap();
        assert_eq!(reports.len(), 10);
        for r in &reports {
            assert!(r.compared > 0, "{} compared nothing", r.name);
            assert!(r.passed, "{} failed: max err {} > {}", r.name, r.max_err, r.tolerance);
        }
        // The suite covers every layer kind; spot-check the tally is real.
        let total: usize = reports.iter().map(|r| r.compared).sum();
        assert!(total > 1500, "suspiciously few comparisons: {total}");
    }

    #[test]
    fn reference_is_sensitive_to_parameters() {
        // Guard against a vacuous comparison: nudge one parameter after the
        // engine ran and the disagreement must be flagged.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_qmap(1, 4, 4, &mut rng);
        let mut kernel = random_qconv(1, 1, 3, &mut rng);
        let cfg = ConvConfig::unit_same();
        let engine = layers::qconv2d_forward(&x, &kernel, &cfg).unwrap();
        kernel.theta[4] += 1e-3;
        let reference = qconv_reference(&x, &kernel, &cfg).unwrap();
        assert!(max_rel_diff(&engine, &reference) > 1e-6);
    }

    #[test]
    fn error_measure_has_absolute_floor() {
        assert_eq!(grad_err(0.0, 5e-8), 0.0);
        assert!(grad_err(1.0, 1.0 + 1e-5) < 2e-5);
        assert!(grad_err(1.0, 2.0) > 0.4);
    }
}
