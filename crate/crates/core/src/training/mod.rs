//! Training loops, losses, optimizers, and checkpoints.
//!
//! Both tasks follow the same shape: shuffle, walk minibatches, accumulate
//! per-sample gradients, average, and hand the batch to the optimizer.
//! Classification pairs images with integer labels under cross-entropy;
//! denoising pairs corrupted images with their originals under mean squared
//! error.

pub mod checkpoint;
pub mod loss;
pub mod optim;

pub use checkpoint::{read_manifest, LoadedCheckpoint, Manifest};
pub use loss::{mse, softmax_cross_entropy};
pub use optim::{Optimizer, OptimizerConfig};

use crate::data::{random_flip_shift, LabeledImages};
use crate::error::{Error, Result};
use crate::metrics;
use crate::net::{rebuild_like, InputKind, LayerGrads, Network, Value};
use crate::num::Real;
use crate::qtensor::{self, ImageBuf, RealFeatureMap};
use rand::seq::SliceRandom;
use rand::Rng;

/// Horizontal-shift budget (pixels) used when augmentation is on.
pub const AUGMENT_MAX_SHIFT: i64 = 4;

/// Convert an RGB image into whatever the network's input kind consumes.
pub fn image_to_input<F: Real>(kind: InputKind, img: &ImageBuf) -> Result<Value<F>> {
    match kind {
        InputKind::Quaternion { .. } => Ok(Value::QMap(qtensor::from_rgb_image(img)?)),
        InputKind::Real => Ok(Value::RMap(RealFeatureMap::from_image(img))),
    }
}

fn zero_grads<F: Real>(net: &Network<F>) -> Vec<LayerGrads<F>> {
    net.layer_params()
        .iter()
        .map(|p| p.arrays().iter().map(|a| vec![F::zero(); a.len()]).collect())
        .collect()
}

fn add_grads<F: Real>(acc: &mut [LayerGrads<F>], g: &[LayerGrads<F>]) {
    for (la, lg) in acc.iter_mut().zip(g) {
        for (aa, ag) in la.iter_mut().zip(lg) {
            for (x, y) in aa.iter_mut().zip(ag) {
                *x += *y;
            }
        }
    }
}

fn scale_grads<F: Real>(acc: &mut [LayerGrads<F>], s: F) {
    for la in acc {
        for aa in la {
            for x in aa {
                *x *= s;
            }
        }
    }
}

fn check_batch(n: usize, batch_size: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("cannot train on an empty set"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    Ok(())
}

fn check_finite(mean_loss: f64) -> Result<f64> {
    if mean_loss.is_finite() {
        Ok(mean_loss)
    } else {
        Err(Error::NonFinite(format!("mean training loss is {mean_loss}")))
    }
}

/// One shuffled pass over a labeled set with cross-entropy. With `augment`
/// each sample is randomly mirrored and shifted by up to
/// [`AUGMENT_MAX_SHIFT`] pixels first. The final short batch is kept.
/// Returns the mean per-sample loss.
pub fn train_classifier_epoch<F: Real>(
    net: &mut Network<F>,
    opt: &mut Optimizer<F>,
    data: &LabeledImages,
    batch_size: usize,
    augment: bool,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_batch(data.images.len(), batch_size)?;
    let kind = net.spec().input;
    let mut order: Vec<usize> = (0..data.images.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0f64;
    for chunk in order.chunks(batch_size) {
        let mut acc = zero_grads(net);
        for &idx in chunk {
            let shifted;
            let img = if augment {
                shifted = random_flip_shift(&data.images[idx], AUGMENT_MAX_SHIFT, rng);
                &shifted
            } else {
                &data.images[idx]
            };
            let x = image_to_input::<F>(kind, img)?;
            let trace = net.forward(&x)?;
            let Value::Vec(logits) = trace.output() else {
                return Err(Error::shape(format!(
                    "classifier must end in a plain vector, got {}",
                    trace.output().shape()
                )));
            };
            let (l, dlogits) = softmax_cross_entropy(logits, data.labels[idx] as usize)?;
            total += l.as_f64();
            let (g, _) = net.backward(&trace, &Value::Vec(dlogits))?;
            add_grads(&mut acc, &g);
        }
        scale_grads(&mut acc, F::from_f64(1.0 / chunk.len() as f64));
        opt.apply(net, &acc)?;
    }
    check_finite(total / data.images.len() as f64)
}

/// Top-1 accuracy over a labeled set.
pub fn evaluate_classifier<F: Real>(net: &mut Network<F>, data: &LabeledImages) -> Result<f64> {
    if data.images.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty set"));
    }
    let kind = net.spec().input;
    let mut preds = Vec::with_capacity(data.images.len());
    for img in &data.images {
        let x = image_to_input::<F>(kind, img)?;
        let trace = net.forward(&x)?;
        let Value::Vec(logits) = trace.output() else {
            return Err(Error::shape(format!(
                "classifier must end in a plain vector, got {}",
                trace.output().shape()
            )));
        };
        preds.push(metrics::argmax(logits));
    }
    Ok(metrics::accuracy(&preds, &data.labels))
}

/// One shuffled pass over (corrupted, clean) pairs with mean squared error.
/// Returns the mean per-sample loss.
pub fn train_denoiser_epoch<F: Real>(
    net: &mut Network<F>,
    opt: &mut Optimizer<F>,
    pairs: &[(ImageBuf, ImageBuf)],
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_batch(pairs.len(), batch_size)?;
    let kind = net.spec().input;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0f64;
    for chunk in order.chunks(batch_size) {
        let mut acc = zero_grads(net);
        for &idx in chunk {
            let (noisy, clean) = &pairs[idx];
            let x = image_to_input::<F>(kind, noisy)?;
            let target = image_to_input::<F>(kind, clean)?;
            let trace = net.forward(&x)?;
            let out = trace.output();
            if out.shape() != target.shape() {
                return Err(Error::shape(format!(
                    "denoiser output {} does not match target {}",
                    out.shape(),
                    target.shape()
                )));
            }
            let (l, dflat) = mse(out.as_slice(), target.as_slice())?;
            total += l.as_f64();
            let gout = rebuild_like(out, dflat)?;
            let (g, _) = net.backward(&trace, &gout)?;
            add_grads(&mut acc, &g);
        }
        scale_grads(&mut acc, F::from_f64(1.0 / chunk.len() as f64));
        opt.apply(net, &acc)?;
    }
    check_finite(total / pairs.len() as f64)
}

/// Convert a network output map back to an RGB image, clamped to [0, 1].
pub fn output_to_image<F: Real>(v: &Value<F>) -> Result<ImageBuf> {
    match v {
        Value::QMap(m) => Ok(qtensor::to_rgb_image(m)?.clamped(0.0, 1.0)),
        Value::RMap(m) => Ok(m.to_image()?.clamped(0.0, 1.0)),
        _ => Err(Error::shape(format!("expected an image-shaped output, got {}", v.shape()))),
    }
}

/// Run one image through a restoration network.
pub fn denoise_image<F: Real>(net: &mut Network<F>, noisy: &ImageBuf) -> Result<ImageBuf> {
    let x = image_to_input::<F>(net.spec().input, noisy)?;
    let trace = net.forward(&x)?;
    output_to_image(trace.output())
}

/// Mean reconstruction PSNR of `denoise(noisy)` against `clean`.
pub fn evaluate_denoiser<F: Real>(
    net: &mut Network<F>,
    pairs: &[(ImageBuf, ImageBuf)],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty set"));
    }
    let mut acc = 0.0;
    for (noisy, clean) in pairs {
        let out = denoise_image(net, noisy)?;
        acc += metrics::image_psnr(&out, clean)?;
    }
    Ok(acc / pairs.len() as f64)
}
