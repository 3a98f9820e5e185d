//! Stock architectures: a shallow CIFAR-style classifier, an encoder/decoder
//! denoiser with skip links, and a deeper VGG-flavored classifier kept
//! around for cost audits.
//!
//! Every preset comes in a quaternion and a real flavor with identical
//! topology. At equal widths a quaternion convolution carries exactly twice
//! the parameters of its real counterpart, so [`scale_width`] (divide by
//! sqrt(2), round half up) produces a quaternion variant with roughly the
//! same budget.

use crate::net::{InputKind, LayerSpec, NetworkSpec, SkipLink};
use crate::layers::Padding;

/// Default filter counts for the four shallow-classifier convolutions.
pub const SHALLOW_CONV_WIDTHS: [usize; 4] = [32, 32, 64, 64];
/// Default hidden width of the shallow classifier's dense layer.
pub const SHALLOW_DENSE_WIDTH: usize = 512;
/// Default filter count throughout the denoiser trunk.
pub const DENOISER_BASE_WIDTH: usize = 32;
/// Side length the denoiser works at.
pub const DENOISER_SIZE: usize = 128;

/// Shrink a width by sqrt(2), rounding half up, so a quaternion layer of the
/// result costs about as much as a real layer of the input width.
pub fn scale_width(w: usize) -> usize {
    (w as f64 / std::f64::consts::SQRT_2).round() as usize
}

/// Four convolutions with two max pools, one hidden dense layer, and a
/// 10-way head, on 32x32 inputs. The quaternion flavor replicates its input
/// channel three times so the first convolution's fan-in matches the real
/// flavor seeing three planes; the head stays real in both flavors.
pub fn shallow_classifier(
    quaternion: bool,
    conv_widths: [usize; 4],
    dense_width: usize,
    classes: usize,
) -> NetworkSpec {
    let same = Padding::Same;
    let conv = |out: usize| -> LayerSpec {
        if quaternion {
            LayerSpec::QConv { out_channels: out, ksize: 3, stride: 1, padding: same }
        } else {
            LayerSpec::RealConv { out_channels: out, ksize: 3, stride: 1, padding: same }
        }
    };
    let hidden = if quaternion {
        LayerSpec::QDense { out_len: dense_width }
    } else {
        LayerSpec::RealDense { out_len: dense_width }
    };
    NetworkSpec {
        input: if quaternion { InputKind::Quaternion { replicate: 3 } } else { InputKind::Real },
        input_h: 32,
        input_w: 32,
        layers: vec![
            conv(conv_widths[0]),
            LayerSpec::Relu,
            conv(conv_widths[1]),
            LayerSpec::Relu,
            LayerSpec::MaxPool { window: 2 },
            conv(conv_widths[2]),
            LayerSpec::Relu,
            conv(conv_widths[3]),
            LayerSpec::Relu,
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Flatten,
            hidden,
            LayerSpec::Relu,
            LayerSpec::RealDense { out_len: classes },
        ],
        skips: vec![],
    }
}

/// The shallow classifier with every width shrunk by [`scale_width`]; used
/// as the budget-matched quaternion counterpart of the real default.
pub fn shallow_classifier_scaled(quaternion: bool, classes: usize) -> NetworkSpec {
    let w = SHALLOW_CONV_WIDTHS.map(scale_width);
    shallow_classifier(quaternion, w, scale_width(SHALLOW_DENSE_WIDTH), classes)
}

/// Encoder/decoder denoiser for 128x128 images: two downsampling stages
/// (two 3x3 convolutions then an average pool), a three-convolution middle
/// with a 1x1 mixer, and two upsampling stages (stride-2 transposed
/// convolution then two 3x3 convolutions), ending in a tanh-bounded
/// reconstruction. Skip links add each stage's pre-pool activation into the
/// matching post-upsample activation.
pub fn denoiser(quaternion: bool, base_width: usize) -> NetworkSpec {
    let same = Padding::Same;
    let conv = |out: usize, ksize: usize| -> LayerSpec {
        if quaternion {
            LayerSpec::QConv { out_channels: out, ksize, stride: 1, padding: same }
        } else {
            LayerSpec::RealConv { out_channels: out, ksize, stride: 1, padding: same }
        }
    };
    let up = |out: usize| -> LayerSpec {
        if quaternion {
            LayerSpec::QConvTranspose { out_channels: out, ksize: 3, stride: 2, padding: same }
        } else {
            LayerSpec::RealConvTranspose { out_channels: out, ksize: 3, stride: 2, padding: same }
        }
    };
    let w = base_width;
    let out_channels = if quaternion { 1 } else { 3 };
    NetworkSpec {
        input: if quaternion { InputKind::Quaternion { replicate: 1 } } else { InputKind::Real },
        input_h: DENOISER_SIZE,
        input_w: DENOISER_SIZE,
        layers: vec![
            // Stage one at 128.
            conv(w, 3),
            LayerSpec::Relu,
            conv(w, 3),
            LayerSpec::Relu, // layer 3: skip source at 128
            LayerSpec::AvgPool { window: 2 },
            // Stage two at 64.
            conv(w, 3),
            LayerSpec::Relu,
            conv(w, 3),
            LayerSpec::Relu, // layer 8: skip source at 64
            LayerSpec::AvgPool { window: 2 },
            // Middle at 32.
            conv(w, 3),
            LayerSpec::Relu,
            conv(w, 3),
            LayerSpec::Relu,
            conv(w, 1),
            LayerSpec::Relu,
            // Back up to 64.
            up(w),
            LayerSpec::Relu, // layer 17: skip target at 64
            conv(w, 3),
            LayerSpec::Relu,
            conv(w, 3),
            LayerSpec::Relu,
            // Back up to 128.
            up(w),
            LayerSpec::Relu, // layer 23: skip target at 128
            conv(w, 3),
            LayerSpec::Relu,
            conv(w, 3),
            LayerSpec::Relu,
            conv(out_channels, 3),
            LayerSpec::Tanh,
        ],
        skips: vec![SkipLink { from: 8, to: 17 }, SkipLink { from: 3, to: 23 }],
    }
}

/// A compact VGG-flavored classifier adapted to 32x32 inputs, kept for cost
/// audits of a deeper stack: five convolutions (5x5, 5x5, then three 3x3),
/// three max pools, and a 1024-wide dense layer before the head.
pub fn vggs_classifier(quaternion: bool, classes: usize) -> NetworkSpec {
    let same = Padding::Same;
    let conv = |out: usize, ksize: usize| -> LayerSpec {
        if quaternion {
            LayerSpec::QConv { out_channels: out, ksize, stride: 1, padding: same }
        } else {
            LayerSpec::RealConv { out_channels: out, ksize, stride: 1, padding: same }
        }
    };
    let hidden = if quaternion {
        LayerSpec::QDense { out_len: 1024 }
    } else {
        LayerSpec::RealDense { out_len: 1024 }
    };
    NetworkSpec {
        input: if quaternion { InputKind::Quaternion { replicate: 3 } } else { InputKind::Real },
        input_h: 32,
        input_w: 32,
        layers: vec![
            conv(96, 5),
            LayerSpec::Relu,
            LayerSpec::MaxPool { window: 2 },
            conv(256, 5),
            LayerSpec::Relu,
            LayerSpec::MaxPool { window: 2 },
            conv(384, 3),
            LayerSpec::Relu,
            conv(384, 3),
            LayerSpec::Relu,
            conv(256, 3),
            LayerSpec::Relu,
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Flatten,
            hidden,
            LayerSpec::Relu,
            LayerSpec::RealDense { out_len: classes },
        ],
        skips: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{infer_shapes, param_count, Shape};

    #[test]
    fn width_scaling_rounds_half_up() {
        assert_eq!(scale_width(32), 23);
        assert_eq!(scale_width(64), 45);
        assert_eq!(scale_width(512), 362);
        assert_eq!(scale_width(8), 6);
    }

    #[test]
    fn shallow_parameter_totals_are_frozen() {
        let real = shallow_classifier(false, SHALLOW_CONV_WIDTHS, SHALLOW_DENSE_WIDTH, 10);
        let quat_same = shallow_classifier(true, SHALLOW_CONV_WIDTHS, SHALLOW_DENSE_WIDTH, 10);
        let quat_scaled = shallow_classifier_scaled(true, 10);
        // Sums of per-layer products: convolutions 864 + 9216 + 18432 +
        // 36864, dense 4096*512, head 512*10 (real); quaternion layers
        // double per tap and the real head sees three scalars per
        // quaternion.
        assert_eq!(param_count(&real).unwrap(), 2_167_648);
        assert_eq!(param_count(&quat_same).unwrap(), 4_340_416);
        assert_eq!(param_count(&quat_scaled).unwrap(), 2_161_824);

        // The scaled quaternion network matches the real budget within 2%.
        let ratio = param_count(&quat_scaled).unwrap() as f64 / param_count(&real).unwrap() as f64;
        assert!((ratio - 1.0).abs() < 0.02, "budget ratio {ratio}");
    }

    #[test]
    fn shallow_shapes_terminate_in_class_scores() {
        for quaternion in [false, true] {
            let spec = shallow_classifier(quaternion, SHALLOW_CONV_WIDTHS, SHALLOW_DENSE_WIDTH, 10);
            let shapes = infer_shapes(&spec).unwrap();
            assert_eq!(*shapes.last().unwrap(), Shape::Vec { n: 10 });
        }
    }

    #[test]
    fn denoiser_round_trips_spatial_size() {
        let quat = denoiser(true, 8);
        let shapes = infer_shapes(&quat).unwrap();
        assert_eq!(*shapes.last().unwrap(), Shape::QMap { c: 1, h: 128, w: 128 });
        // Skip endpoints sit at matching resolutions.
        assert_eq!(shapes[8], shapes[17]);
        assert_eq!(shapes[3], shapes[23]);
        assert_eq!(shapes[8], Shape::QMap { c: 8, h: 64, w: 64 });

        let real = denoiser(false, 8);
        let shapes = infer_shapes(&real).unwrap();
        assert_eq!(*shapes.last().unwrap(), Shape::RMap { c: 3, h: 128, w: 128 });
    }

    #[test]
    fn vggs_audits_deeper_stack() {
        let real = vggs_classifier(false, 10);
        let quat = vggs_classifier(true, 10);
        let rows_r = crate::net::audit(&real).unwrap();
        let rows_q = crate::net::audit(&quat).unwrap();
        // Every convolution row doubles in the quaternion flavor.
        for (r, q) in rows_r.iter().zip(&rows_q) {
            if r.label.starts_with("conv") {
                assert_eq!(q.params, 2 * r.params);
            }
        }
        assert!(param_count(&real).unwrap() > 7_000_000);
    }
}
