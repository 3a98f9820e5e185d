//! Network assembly: a declarative layer list plus optional additive skip
//! links, with shape inference, initialization, and full forward/backward.
//!
//! The quaternion and real variants of an architecture differ only in layer
//! kinds (and possibly filter counts), never in topology, so switching
//! domains is a pure kind substitution. Parameters are exposed as flat
//! arrays per layer ([s, theta] for quaternion kinds, [w] for real ones),
//! which is the one shape optimizers, checkpoints, and gradient checks all
//! agree on.

use crate::error::{Error, Result};
use crate::layers::conv::{QConvCache, QConvKernel, RealConvKernel};
use crate::layers::dense::{QDenseCache, QDenseKernel, RealDenseKernel};
use crate::layers::{self, ConvConfig, Padding, PoolRouting};
use crate::num::Real;
use crate::qtensor::{QFeatureMap, QVector, RealFeatureMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How the network ingests an RGB image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputKind {
    /// Embed as pure quaternions, then replicate the single channel this
    /// many times. Replication gives the first convolution the same fan-in
    /// as a real network seeing three planes; use 1 for no replication.
    Quaternion { replicate: usize },
    /// Split into three real planes.
    Real,
}

/// One layer of the stack. Convolutions carry their own stride/padding;
/// pools use stride equal to the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    QConv { out_channels: usize, ksize: usize, stride: usize, padding: Padding },
    RealConv { out_channels: usize, ksize: usize, stride: usize, padding: Padding },
    QConvTranspose { out_channels: usize, ksize: usize, stride: usize, padding: Padding },
    RealConvTranspose { out_channels: usize, ksize: usize, stride: usize, padding: Padding },
    MaxPool { window: usize },
    AvgPool { window: usize },
    Relu,
    Tanh,
    /// Map to vector form: quaternion maps flatten to quaternion vectors,
    /// real maps to plain vectors, both channel-major.
    Flatten,
    QDense { out_len: usize },
    /// Plain dense layer. Accepts a real vector, or a quaternion vector via
    /// its flat part-interleaved storage (the fan-in is then three times
    /// the quaternion count).
    RealDense { out_len: usize },
}

/// Adds the output of layer `from` into the output of layer `to` (both taken
/// after their own computation and any earlier skip additions). Shapes and
/// kinds must match.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipLink {
    pub from: usize,
    pub to: usize,
}

/// Architecture description: everything needed to rebuild a network except
/// the parameter values themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputKind,
    pub input_h: usize,
    pub input_w: usize,
    pub layers: Vec<LayerSpec>,
    pub skips: Vec<SkipLink>,
}

impl NetworkSpec {
    fn input_shape(&self) -> Shape {
        match self.input {
            InputKind::Quaternion { replicate } => {
                Shape::QMap { c: replicate, h: self.input_h, w: self.input_w }
            }
            InputKind::Real => Shape::RMap { c: 3, h: self.input_h, w: self.input_w },
        }
    }
}

/// Shape of a value flowing between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    QMap { c: usize, h: usize, w: usize },
    RMap { c: usize, h: usize, w: usize },
    QVec { n: usize },
    Vec { n: usize },
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::QMap { c, h, w } => write!(f, "quat({c},{h},{w})"),
            Shape::RMap { c, h, w } => write!(f, "real({c},{h},{w})"),
            Shape::QVec { n } => write!(f, "qvec({n})"),
            Shape::Vec { n } => write!(f, "vec({n})"),
        }
    }
}

/// A value flowing through the network.
#[derive(Clone, Debug)]
pub enum Value<F> {
    QMap(QFeatureMap<F>),
    RMap(RealFeatureMap<F>),
    QVec(QVector<F>),
    Vec(Vec<F>),
}

impl<F: Real> Value<F> {
    pub fn shape(&self) -> Shape {
        match self {
            Value::QMap(m) => Shape::QMap { c: m.channels(), h: m.height(), w: m.width() },
            Value::RMap(m) => Shape::RMap { c: m.channels(), h: m.height(), w: m.width() },
            Value::QVec(v) => Shape::QVec { n: v.len() },
            Value::Vec(v) => Shape::Vec { n: v.len() },
        }
    }

    pub fn as_slice(&self) -> &[F] {
        match self {
            Value::QMap(m) => m.as_slice(),
            Value::RMap(m) => m.as_slice(),
            Value::QVec(v) => v.as_slice(),
            Value::Vec(v) => v,
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        match self {
            Value::QMap(m) => m.as_mut_slice(),
            Value::RMap(m) => m.as_mut_slice(),
            Value::QVec(v) => v.as_mut_slice(),
            Value::Vec(v) => v,
        }
    }

    /// Elementwise accumulate; shapes must match exactly.
    pub fn add_assign(&mut self, other: &Value<F>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "cannot add {} into {}",
                other.shape(),
                self.shape()
            )));
        }
        for (a, b) in self.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *a += *b;
        }
        Ok(())
    }
}

/// Validate a spec and compute the shape after every layer.
pub fn infer_shapes(spec: &NetworkSpec) -> Result<Vec<Shape>> {
    if let InputKind::Quaternion { replicate: 0 } = spec.input {
        return Err(Error::invalid("input replication factor must be at least 1"));
    }
    let mut cur = spec.input_shape();
    let mut shapes = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        cur = match (*layer, cur) {
            (LayerSpec::QConv { out_channels, ksize, stride, padding }, Shape::QMap { h, w, .. }) => {
                let g = layers::im2col::conv_geometry(h, w, ksize, stride, padding)
                    .map_err(|e| Error::shape(format!("layer {i}: {e}")))?;
                Shape::QMap { c: out_channels, h: g.out_h, w: g.out_w }
            }
            (LayerSpec::RealConv { out_channels, ksize, stride, padding }, Shape::RMap { h, w, .. }) => {
                let g = layers::im2col::conv_geometry(h, w, ksize, stride, padding)
                    .map_err(|e| Error::shape(format!("layer {i}: {e}")))?;
                Shape::RMap { c: out_channels, h: g.out_h, w: g.out_w }
            }
            (LayerSpec::QConvTranspose { out_channels, ksize, stride, padding }, Shape::QMap { h, w, .. }) => {
                let g = layers::im2col::tconv_geometry(h, w, ksize, stride, padding)
                    .map_err(|e| Error::shape(format!("layer {i}: {e}")))?;
                Shape::QMap { c: out_channels, h: g.out_h, w: g.out_w }
            }
            (LayerSpec::RealConvTranspose { out_channels, ksize, stride, padding }, Shape::RMap { h, w, .. }) => {
                let g = layers::im2col::tconv_geometry(h, w, ksize, stride, padding)
                    .map_err(|e| Error::shape(format!("layer {i}: {e}")))?;
                Shape::RMap { c: out_channels, h: g.out_h, w: g.out_w }
            }
            (LayerSpec::MaxPool { window }, Shape::QMap { c, h, w })
            | (LayerSpec::AvgPool { window }, Shape::QMap { c, h, w }) => {
                check_pool_tiles(i, window, h, w)?;
                Shape::QMap { c, h: h / window, w: w / window }
            }
            (LayerSpec::MaxPool { window }, Shape::RMap { c, h, w })
            | (LayerSpec::AvgPool { window }, Shape::RMap { c, h, w }) => {
                check_pool_tiles(i, window, h, w)?;
                Shape::RMap { c, h: h / window, w: w / window }
            }
            (LayerSpec::Relu, s) | (LayerSpec::Tanh, s) => s,
            (LayerSpec::Flatten, Shape::QMap { c, h, w }) => Shape::QVec { n: c * h * w },
            (LayerSpec::Flatten, Shape::RMap { c, h, w }) => Shape::Vec { n: c * h * w },
            (LayerSpec::QDense { out_len }, Shape::QVec { .. }) => Shape::QVec { n: out_len },
            (LayerSpec::RealDense { out_len }, Shape::Vec { .. })
            | (LayerSpec::RealDense { out_len }, Shape::QVec { .. }) => Shape::Vec { n: out_len },
            (l, s) => return Err(Error::shape(format!("layer {i}: {l:?} cannot consume {s}"))),
        };
        shapes.push(cur);
    }
    for (si, skip) in spec.skips.iter().enumerate() {
        if skip.from >= skip.to || skip.to >= spec.layers.len() {
            return Err(Error::invalid(format!(
                "skip {si}: from {} to {} is not strictly forward within {} layers",
                skip.from,
                skip.to,
                spec.layers.len()
            )));
        }
        if shapes[skip.from] != shapes[skip.to] {
            return Err(Error::shape(format!(
                "skip {si}: shape {} at layer {} does not match {} at layer {}",
                shapes[skip.from], skip.from, shapes[skip.to], skip.to
            )));
        }
    }
    Ok(shapes)
}

fn check_pool_tiles(i: usize, window: usize, h: usize, w: usize) -> Result<()> {
    if window == 0 || h % window != 0 || w % window != 0 {
        return Err(Error::shape(format!(
            "layer {i}: {window}x{window} pool does not tile {h}x{w}"
        )));
    }
    Ok(())
}

/// One row of the cost model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerAudit {
    pub index: usize,
    pub label: String,
    pub params: u64,
    pub mults: u64,
}

/// Parameter/multiplication table for a spec. Parameter-free layers count
/// zero; multiplication counts use each layer's input spatial size.
pub fn audit(spec: &NetworkSpec) -> Result<Vec<LayerAudit>> {
    let shapes = infer_shapes(spec)?;
    let mut rows = Vec::new();
    for (i, layer) in spec.layers.iter().enumerate() {
        let before = if i == 0 { spec.input_shape() } else { shapes[i - 1] };
        let (label, params, mults) = match (*layer, before) {
            (LayerSpec::QConv { out_channels, ksize, .. }, Shape::QMap { c, h, .. }) => {
                let (p, m) = layers::qconv_counts(out_channels, c, ksize, h);
                (format!("qconv {c}->{out_channels} {ksize}x{ksize}"), p, m)
            }
            (LayerSpec::QConvTranspose { out_channels, ksize, .. }, Shape::QMap { c, h, .. }) => {
                let (p, m) = layers::qconv_counts(out_channels, c, ksize, h);
                (format!("qconv-t {c}->{out_channels} {ksize}x{ksize}"), p, m)
            }
            (LayerSpec::RealConv { out_channels, ksize, .. }, Shape::RMap { c, h, .. }) => {
                let (p, m) = layers::real_conv_counts(out_channels, c, ksize, h);
                (format!("conv {c}->{out_channels} {ksize}x{ksize}"), p, m)
            }
            (LayerSpec::RealConvTranspose { out_channels, ksize, .. }, Shape::RMap { c, h, .. }) => {
                let (p, m) = layers::real_conv_counts(out_channels, c, ksize, h);
                (format!("conv-t {c}->{out_channels} {ksize}x{ksize}"), p, m)
            }
            (LayerSpec::QDense { out_len }, Shape::QVec { n }) => {
                let (p, m) = layers::qdense_counts(out_len, n);
                (format!("qdense {n}->{out_len}"), p, m)
            }
            (LayerSpec::RealDense { out_len }, Shape::Vec { n }) => {
                let (p, m) = layers::real_dense_counts(out_len, n);
                (format!("dense {n}->{out_len}"), p, m)
            }
            (LayerSpec::RealDense { out_len }, Shape::QVec { n }) => {
                let (p, m) = layers::real_dense_counts(out_len, 3 * n);
                (format!("dense {}->{out_len}", 3 * n), p, m)
            }
            (LayerSpec::MaxPool { window }, _) => (format!("maxpool {window}x{window}"), 0, 0),
            (LayerSpec::AvgPool { window }, _) => (format!("avgpool {window}x{window}"), 0, 0),
            (LayerSpec::Relu, _) => ("relu".to_string(), 0, 0),
            (LayerSpec::Tanh, _) => ("tanh".to_string(), 0, 0),
            (LayerSpec::Flatten, _) => ("flatten".to_string(), 0, 0),
            (l, s) => return Err(Error::shape(format!("layer {i}: {l:?} cannot consume {s}"))),
        };
        rows.push(LayerAudit { index: i, label, params, mults });
    }
    Ok(rows)
}

/// Total learnable scalar count of a spec.
pub fn param_count(spec: &NetworkSpec) -> Result<u64> {
    Ok(audit(spec)?.iter().map(|r| r.params).sum())
}

/// Parameters of one layer; `None` for parameter-free layers. Transposed
/// convolutions reuse the convolution kernel type.
#[derive(Clone, Debug)]
pub enum LayerParams<F> {
    QConv(QConvKernel<F>),
    RealConv(RealConvKernel<F>),
    QDense(QDenseKernel<F>),
    RealDense(RealDenseKernel<F>),
    None,
}

impl<F: Real> LayerParams<F> {
    /// Flat parameter arrays in frozen order: [s, theta] or [w].
    pub fn arrays(&self) -> Vec<&Vec<F>> {
        match self {
            LayerParams::QConv(k) => vec![&k.s, &k.theta],
            LayerParams::RealConv(k) => vec![&k.w],
            LayerParams::QDense(k) => vec![&k.s, &k.theta],
            LayerParams::RealDense(k) => vec![&k.w],
            LayerParams::None => vec![],
        }
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Vec<F>> {
        match self {
            LayerParams::QConv(k) => vec![&mut k.s, &mut k.theta],
            LayerParams::RealConv(k) => vec![&mut k.w],
            LayerParams::QDense(k) => vec![&mut k.s, &mut k.theta],
            LayerParams::RealDense(k) => vec![&mut k.w],
            LayerParams::None => vec![],
        }
    }
}

enum LayerCache<F> {
    QConv(QConvCache<F>),
    QDense(QDenseCache<F>),
}

/// Per-layer gradient arrays, aligned with [`LayerParams::arrays`].
pub type LayerGrads<F> = Vec<Vec<F>>;

/// Everything the backward pass needs from a forward pass: the adapted
/// input, each layer's (post-skip) output, and pool routings.
pub struct Trace<F> {
    input: Value<F>,
    values: Vec<Value<F>>,
    routings: Vec<Option<PoolRouting>>,
}

impl<F: Real> Trace<F> {
    /// The network output (post-skip output of the last layer).
    pub fn output(&self) -> &Value<F> {
        self.values.last().unwrap_or(&self.input)
    }

    /// The post-skip output of layer `i`.
    pub fn value(&self, i: usize) -> &Value<F> {
        &self.values[i]
    }
}

/// A spec bound to parameter values in a concrete precision.
pub struct Network<F> {
    spec: NetworkSpec,
    shapes: Vec<Shape>,
    params: Vec<LayerParams<F>>,
    caches: Vec<Option<LayerCache<F>>>,
}

impl<F: Real> Network<F> {
    /// Build with uniform random init: per layer, scales draw from
    /// U(-b, b) with b = sqrt(6 / (fan_in + fan_out)) counted in filter
    /// elements, angles from U(-pi/2, pi/2); real weights use the same
    /// bound. The draw order is frozen, so a seed pins every parameter.
    pub fn build(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut net = Self::build_zeroed(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half_pi = std::f64::consts::FRAC_PI_2;
        for p in &mut net.params {
            match p {
                LayerParams::QConv(k) => {
                    let l2 = k.ksize * k.ksize;
                    let b = init_bound(k.in_channels * l2, k.out_channels * l2);
                    for s in &mut k.s {
                        *s = F::from_f64(rng.random_range(-b..b));
                    }
                    for t in &mut k.theta {
                        *t = F::from_f64(rng.random_range(-half_pi..half_pi));
                    }
                }
                LayerParams::RealConv(k) => {
                    let l2 = k.ksize * k.ksize;
                    let b = init_bound(k.in_channels * l2, k.out_channels * l2);
                    for w in &mut k.w {
                        *w = F::from_f64(rng.random_range(-b..b));
                    }
                }
                LayerParams::QDense(k) => {
                    let b = init_bound(k.in_len, k.out_len);
                    for s in &mut k.s {
                        *s = F::from_f64(rng.random_range(-b..b));
                    }
                    for t in &mut k.theta {
                        *t = F::from_f64(rng.random_range(-half_pi..half_pi));
                    }
                }
                LayerParams::RealDense(k) => {
                    let b = init_bound(k.in_len, k.out_len);
                    for w in &mut k.w {
                        *w = F::from_f64(rng.random_range(-b..b));
                    }
                }
                LayerParams::None => {}
            }
        }
        Ok(net)
    }

    /// Build with all parameters zero; checkpoint loading fills them in.
    pub fn build_zeroed(spec: NetworkSpec) -> Result<Self> {
        let shapes = infer_shapes(&spec)?;
        let mut params = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            let before = if i == 0 { spec.input_shape() } else { shapes[i - 1] };
            params.push(match (*layer, before) {
                (LayerSpec::QConv { out_channels, ksize, .. }, Shape::QMap { c, .. })
                | (LayerSpec::QConvTranspose { out_channels, ksize, .. }, Shape::QMap { c, .. }) => {
                    LayerParams::QConv(QConvKernel::zeros(out_channels, c, ksize))
                }
                (LayerSpec::RealConv { out_channels, ksize, .. }, Shape::RMap { c, .. })
                | (LayerSpec::RealConvTranspose { out_channels, ksize, .. }, Shape::RMap { c, .. }) => {
                    LayerParams::RealConv(RealConvKernel::zeros(out_channels, c, ksize))
                }
                (LayerSpec::QDense { out_len }, Shape::QVec { n }) => {
                    LayerParams::QDense(QDenseKernel::zeros(out_len, n))
                }
                (LayerSpec::RealDense { out_len }, Shape::Vec { n }) => {
                    LayerParams::RealDense(RealDenseKernel::zeros(out_len, n))
                }
                (LayerSpec::RealDense { out_len }, Shape::QVec { n }) => {
                    LayerParams::RealDense(RealDenseKernel::zeros(out_len, 3 * n))
                }
                _ => LayerParams::None,
            });
        }
        let n = spec.layers.len();
        Ok(Network { spec, shapes, params, caches: (0..n).map(|_| None).collect() })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn output_shape(&self) -> Shape {
        *self.shapes.last().expect("network has at least one layer")
    }

    pub fn layer_params(&self) -> &[LayerParams<F>] {
        &self.params
    }

    pub fn layer_params_mut(&mut self) -> &mut [LayerParams<F>] {
        &mut self.params
    }

    /// Drop cached rotation tables; call after any parameter change.
    pub fn invalidate_caches(&mut self) {
        for c in &mut self.caches {
            *c = None;
        }
    }

    /// Total learnable scalars.
    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.arrays().iter().map(|a| a.len()).sum::<usize>()).sum()
    }

    fn ensure_cache(&mut self, i: usize) {
        if self.caches[i].is_some() {
            return;
        }
        self.caches[i] = match (&self.params[i], &self.spec.layers[i]) {
            (LayerParams::QConv(k), LayerSpec::QConv { .. }) => {
                Some(LayerCache::QConv(QConvCache::new(k)))
            }
            (LayerParams::QConv(k), LayerSpec::QConvTranspose { .. }) => {
                Some(LayerCache::QConv(QConvCache::new_flipped(k)))
            }
            (LayerParams::QDense(k), _) => Some(LayerCache::QDense(QDenseCache::new(k))),
            _ => None,
        };
    }

    /// Wrap a raw input according to the spec's input kind, validating size.
    pub fn adapt_input(&self, input: &Value<F>) -> Result<Value<F>> {
        let (h, w) = (self.spec.input_h, self.spec.input_w);
        match (self.spec.input, input) {
            (InputKind::Quaternion { replicate }, Value::QMap(m)) => {
                if m.channels() != 1 || m.height() != h || m.width() != w {
                    return Err(Error::shape(format!(
                        "expected quat(1,{h},{w}) input, got {}",
                        input.shape()
                    )));
                }
                Ok(if replicate == 1 {
                    input.clone()
                } else {
                    Value::QMap(m.replicate_channels(replicate))
                })
            }
            (InputKind::Real, Value::RMap(m)) => {
                if m.channels() != 3 || m.height() != h || m.width() != w {
                    return Err(Error::shape(format!(
                        "expected real(3,{h},{w}) input, got {}",
                        input.shape()
                    )));
                }
                Ok(input.clone())
            }
            _ => Err(Error::shape(format!(
                "input kind {:?} cannot accept {}",
                self.spec.input,
                input.shape()
            ))),
        }
    }

    /// Run the network, returning the trace backward needs; the output is
    /// `trace.output()`.
    pub fn forward(&mut self, input: &Value<F>) -> Result<Trace<F>> {
        let adapted = self.adapt_input(input)?;
        let n = self.spec.layers.len();
        let mut values: Vec<Value<F>> = Vec::with_capacity(n);
        let mut routings: Vec<Option<PoolRouting>> = (0..n).map(|_| None).collect();
        for i in 0..n {
            self.ensure_cache(i);
            let x = if i == 0 { &adapted } else { &values[i - 1] };
            let mut out = self.layer_forward(i, x, &mut routings[i])?;
            for skip in &self.spec.skips {
                if skip.to == i {
                    out.add_assign(&values[skip.from])?;
                }
            }
            values.push(out);
        }
        Ok(Trace { input: adapted, values, routings })
    }

    fn layer_forward(&self, i: usize, x: &Value<F>, routing: &mut Option<PoolRouting>) -> Result<Value<F>> {
        let layer = self.spec.layers[i];
        let params = &self.params[i];
        let cache = &self.caches[i];
        Ok(match (layer, x) {
            (LayerSpec::QConv { stride, padding, .. }, Value::QMap(m)) => {
                let (LayerParams::QConv(k), Some(LayerCache::QConv(c))) = (params, cache) else {
                    unreachable!("qconv layer built without kernel/cache")
                };
                Value::QMap(layers::qconv2d_forward_cached(m, k, &ConvConfig { stride, padding }, c)?)
            }
            (LayerSpec::QConvTranspose { stride, padding, .. }, Value::QMap(m)) => {
                let (LayerParams::QConv(k), Some(LayerCache::QConv(c))) = (params, cache) else {
                    unreachable!("transposed qconv layer built without kernel/cache")
                };
                Value::QMap(layers::qconv_transpose2d_forward_cached(
                    m,
                    k,
                    &ConvConfig { stride, padding },
                    c,
                )?)
            }
            (LayerSpec::RealConv { stride, padding, .. }, Value::RMap(m)) => {
                let LayerParams::RealConv(k) = params else { unreachable!() };
                Value::RMap(layers::real_conv2d_forward(m, k, &ConvConfig { stride, padding })?)
            }
            (LayerSpec::RealConvTranspose { stride, padding, .. }, Value::RMap(m)) => {
                let LayerParams::RealConv(k) = params else { unreachable!() };
                Value::RMap(layers::real_conv_transpose2d_forward(m, k, &ConvConfig { stride, padding })?)
            }
            (LayerSpec::MaxPool { window }, v) => {
                let (ch, h, w) = plane_dims(v)?;
                let (out, r) = layers::maxpool_planes(v.as_slice(), ch, h, w, window, window)?;
                let res = rebuild_planes(v, out, r.out_h, r.out_w)?;
                *routing = Some(r);
                res
            }
            (LayerSpec::AvgPool { window }, v) => {
                let (ch, h, w) = plane_dims(v)?;
                let (out, oh, ow) = layers::avgpool_planes(v.as_slice(), ch, h, w, window, window)?;
                rebuild_planes(v, out, oh, ow)?
            }
            (LayerSpec::Relu, v) => rebuild_like(v, layers::relu_forward(v.as_slice()))?,
            (LayerSpec::Tanh, v) => rebuild_like(v, layers::tanh_forward(v.as_slice()))?,
            (LayerSpec::Flatten, Value::QMap(m)) => Value::QVec(m.flatten()),
            (LayerSpec::Flatten, Value::RMap(m)) => Value::Vec(m.flatten()),
            (LayerSpec::QDense { .. }, Value::QVec(v)) => {
                let (LayerParams::QDense(k), Some(LayerCache::QDense(c))) = (params, cache) else {
                    unreachable!("qdense layer built without kernel/cache")
                };
                Value::QVec(layers::qdense_forward_cached(v, k, c)?)
            }
            (LayerSpec::RealDense { .. }, Value::Vec(v)) => {
                let LayerParams::RealDense(k) = params else { unreachable!() };
                Value::Vec(layers::real_dense_forward(v, k)?)
            }
            (LayerSpec::RealDense { .. }, Value::QVec(v)) => {
                let LayerParams::RealDense(k) = params else { unreachable!() };
                Value::Vec(layers::real_dense_forward(v.as_slice(), k)?)
            }
            (l, v) => {
                return Err(Error::shape(format!(
                    "layer {i}: {l:?} cannot consume {}",
                    v.shape()
                )))
            }
        })
    }

    /// Backpropagate `grad_out` (gradient at the network output) through a
    /// trace. Returns per-layer parameter gradients aligned with
    /// [`LayerParams::arrays`], plus the gradient at the raw input (folded
    /// back through any input replication).
    pub fn backward(
        &mut self,
        trace: &Trace<F>,
        grad_out: &Value<F>,
    ) -> Result<(Vec<LayerGrads<F>>, Value<F>)> {
        let n = self.spec.layers.len();
        if grad_out.shape() != trace.output().shape() {
            return Err(Error::shape(format!(
                "output gradient {} does not match network output {}",
                grad_out.shape(),
                trace.output().shape()
            )));
        }
        let mut d_out: Vec<Option<Value<F>>> = (0..n).map(|_| None).collect();
        d_out[n - 1] = Some(grad_out.clone());
        let mut grads: Vec<LayerGrads<F>> = (0..n).map(|_| Vec::new()).collect();
        let mut d_input: Option<Value<F>> = None;
        for i in (0..n).rev() {
            let g = d_out[i].take().expect("reverse order fills every gradient");
            // Layer i's post-skip output also feeds its skip sources, which
            // therefore see the same upstream gradient.
            for skip in &self.spec.skips {
                if skip.to == i {
                    accumulate(&mut d_out[skip.from], &g)?;
                }
            }
            let x = if i == 0 { &trace.input } else { &trace.values[i - 1] };
            self.ensure_cache(i);
            let (gin, pg) = self.layer_backward(i, x, trace.routings[i].as_ref(), &g)?;
            grads[i] = pg;
            if i == 0 {
                accumulate(&mut d_input, &gin)?;
            } else {
                accumulate(&mut d_out[i - 1], &gin)?;
            }
        }
        let d_adapted = d_input.expect("input gradient produced");
        let d_raw = match (self.spec.input, d_adapted) {
            (InputKind::Quaternion { replicate }, Value::QMap(m)) if replicate > 1 => {
                Value::QMap(m.fold_replicated(replicate)?)
            }
            (_, v) => v,
        };
        Ok((grads, d_raw))
    }

    fn layer_backward(
        &self,
        i: usize,
        x: &Value<F>,
        routing: Option<&PoolRouting>,
        g: &Value<F>,
    ) -> Result<(Value<F>, LayerGrads<F>)> {
        let layer = self.spec.layers[i];
        let params = &self.params[i];
        let cache = &self.caches[i];
        Ok(match (layer, x, g) {
            (LayerSpec::QConv { stride, padding, .. }, Value::QMap(m), Value::QMap(gm)) => {
                let (LayerParams::QConv(k), Some(LayerCache::QConv(c))) = (params, cache) else {
                    unreachable!()
                };
                let r = layers::qconv2d_backward_cached(m, k, &ConvConfig { stride, padding }, gm, c)?;
                (Value::QMap(r.input), vec![r.s, r.theta])
            }
            (LayerSpec::QConvTranspose { stride, padding, .. }, Value::QMap(m), Value::QMap(gm)) => {
                let (LayerParams::QConv(k), Some(LayerCache::QConv(c))) = (params, cache) else {
                    unreachable!()
                };
                let r = layers::qconv_transpose2d_backward_cached(
                    m,
                    k,
                    &ConvConfig { stride, padding },
                    gm,
                    c,
                )?;
                (Value::QMap(r.input), vec![r.s, r.theta])
            }
            (LayerSpec::RealConv { stride, padding, .. }, Value::RMap(m), Value::RMap(gm)) => {
                let LayerParams::RealConv(k) = params else { unreachable!() };
                let r = layers::real_conv2d_backward(m, k, &ConvConfig { stride, padding }, gm)?;
                (Value::RMap(r.input), vec![r.w])
            }
            (LayerSpec::RealConvTranspose { stride, padding, .. }, Value::RMap(m), Value::RMap(gm)) => {
                let LayerParams::RealConv(k) = params else { unreachable!() };
                let r = layers::real_conv_transpose2d_backward(m, k, &ConvConfig { stride, padding }, gm)?;
                (Value::RMap(r.input), vec![r.w])
            }
            (LayerSpec::MaxPool { .. }, v, gp) => {
                let r = routing.expect("forward recorded maxpool routing");
                (rebuild_like(v, layers::maxpool_backward_planes(r, gp.as_slice())?)?, vec![])
            }
            (LayerSpec::AvgPool { window }, v, gp) => {
                let (ch, h, w) = plane_dims(v)?;
                let dx = layers::avgpool_backward_planes(
                    gp.as_slice(),
                    ch,
                    h,
                    w,
                    h / window,
                    w / window,
                    window,
                    window,
                );
                (rebuild_like(v, dx)?, vec![])
            }
            (LayerSpec::Relu, v, gp) => {
                (rebuild_like(v, layers::relu_backward(v.as_slice(), gp.as_slice()))?, vec![])
            }
            (LayerSpec::Tanh, v, gp) => {
                // Skip additions land after the activation, so the traced
                // value may not equal tanh(x); recompute the plain output.
                let y = layers::tanh_forward(v.as_slice());
                (rebuild_like(v, layers::tanh_backward(&y, gp.as_slice()))?, vec![])
            }
            (LayerSpec::Flatten, Value::QMap(m), Value::QVec(gv)) => (
                Value::QMap(QFeatureMap::from_qvector(gv, m.channels(), m.height(), m.width())?),
                vec![],
            ),
            (LayerSpec::Flatten, Value::RMap(m), Value::Vec(gv)) => (
                Value::RMap(RealFeatureMap::from_vec(m.channels(), m.height(), m.width(), gv.clone())?),
                vec![],
            ),
            (LayerSpec::QDense { .. }, Value::QVec(v), Value::QVec(gv)) => {
                let (LayerParams::QDense(k), Some(LayerCache::QDense(c))) = (params, cache) else {
                    unreachable!()
                };
                let r = layers::qdense_backward_cached(v, k, gv, c)?;
                (Value::QVec(r.input), vec![r.s, r.theta])
            }
            (LayerSpec::RealDense { .. }, Value::Vec(v), Value::Vec(gv)) => {
                let LayerParams::RealDense(k) = params else { unreachable!() };
                let r = layers::real_dense_backward(v, k, gv)?;
                (Value::Vec(r.input), vec![r.w])
            }
            (LayerSpec::RealDense { .. }, Value::QVec(v), Value::Vec(gv)) => {
                let LayerParams::RealDense(k) = params else { unreachable!() };
                let r = layers::real_dense_backward(v.as_slice(), k, gv)?;
                (Value::QVec(QVector::from_vec(v.len(), r.input)?), vec![r.w])
            }
            (l, v, _) => {
                return Err(Error::shape(format!(
                    "layer {i}: {l:?} backward cannot consume {}",
                    v.shape()
                )))
            }
        })
    }
}

fn init_bound(n_in: usize, n_out: usize) -> f64 {
    (6.0 / (n_in + n_out) as f64).sqrt()
}

fn plane_dims<F: Real>(v: &Value<F>) -> Result<(usize, usize, usize)> {
    match v.shape() {
        Shape::QMap { c, h, w } => Ok((3 * c, h, w)),
        Shape::RMap { c, h, w } => Ok((c, h, w)),
        s => Err(Error::shape(format!("spatial operation on non-map value {s}"))),
    }
}

/// Wrap plane data in the same map kind as `like` but with new spatial size.
fn rebuild_planes<F: Real>(like: &Value<F>, data: Vec<F>, h: usize, w: usize) -> Result<Value<F>> {
    match like.shape() {
        Shape::QMap { c, .. } => Ok(Value::QMap(QFeatureMap::from_vec(c, h, w, data)?)),
        Shape::RMap { c, .. } => Ok(Value::RMap(RealFeatureMap::from_vec(c, h, w, data)?)),
        s => Err(Error::shape(format!("cannot rebuild planes as {s}"))),
    }
}

/// Wrap flat data in exactly `like`'s shape.
pub(crate) fn rebuild_like<F: Real>(like: &Value<F>, data: Vec<F>) -> Result<Value<F>> {
    match like.shape() {
        Shape::QMap { c, h, w } => Ok(Value::QMap(QFeatureMap::from_vec(c, h, w, data)?)),
        Shape::RMap { c, h, w } => Ok(Value::RMap(RealFeatureMap::from_vec(c, h, w, data)?)),
        Shape::QVec { n } => Ok(Value::QVec(QVector::from_vec(n, data)?)),
        Shape::Vec { .. } => Ok(Value::Vec(data)),
    }
}

fn accumulate<F: Real>(slot: &mut Option<Value<F>>, v: &Value<F>) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(v),
        None => {
            *slot = Some(v.clone());
            Ok(())
        }
    }
}
