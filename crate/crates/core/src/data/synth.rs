//! Deterministic synthetic datasets, for self-contained runs and tests:
//! a class-separable stand-in for the 32x32 labeled format, and a corpus of
//! smooth color textures for denoising work. Everything derives from an
//! explicit seed, so corpora can be regenerated bit-identically.

use crate::data::cifar::{IMAGE_SIDE, NUM_CLASSES, RECORD_LEN};
use crate::data::images::save_png;
use crate::error::{Error, Result};
use crate::qtensor::ImageBuf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Ten well-separated base colors, one per class.
pub const CLASS_COLORS: [[f32; 3]; NUM_CLASSES] = [
    [0.90, 0.10, 0.10],
    [0.10, 0.90, 0.10],
    [0.10, 0.10, 0.90],
    [0.90, 0.90, 0.10],
    [0.90, 0.10, 0.90],
    [0.10, 0.90, 0.90],
    [0.90, 0.50, 0.10],
    [0.45, 0.10, 0.90],
    [0.20, 0.60, 0.35],
    [0.60, 0.40, 0.20],
];

/// One 32x32 example of a class: its base color under a random sinusoidal
/// illumination field plus per-scalar jitter. Classes stay linearly
/// separable by hue while single images vary enough to need actual fitting.
pub fn class_image(class: usize, rng: &mut impl Rng) -> ImageBuf {
    let color = CLASS_COLORS[class % NUM_CLASSES];
    let fx = rng.random_range(1..4) as f32;
    let fy = rng.random_range(1..4) as f32;
    let phase = rng.random_range(0.0..std::f32::consts::TAU);
    let mut img = ImageBuf::new(IMAGE_SIDE, IMAGE_SIDE);
    for y in 0..IMAGE_SIDE {
        for x in 0..IMAGE_SIDE {
            let t = std::f32::consts::TAU * (fx * x as f32 + fy * y as f32) / IMAGE_SIDE as f32;
            let glow = 0.55 + 0.35 * (t + phase).sin();
            let mut p = [0.0f32; 3];
            for ch in 0..3 {
                let jitter: f32 = rng.random_range(-0.08..0.08);
                p[ch] = (color[ch] * glow + jitter).clamp(0.0, 1.0);
            }
            img.set_pixel(y, x, p);
        }
    }
    img
}

fn record_bytes(label: u8, img: &ImageBuf) -> Vec<u8> {
    let area = IMAGE_SIDE * IMAGE_SIDE;
    let mut rec = vec![0u8; RECORD_LEN];
    rec[0] = label;
    for ch in 0..3 {
        for i in 0..area {
            rec[1 + ch * area + i] = (img.data[i * 3 + ch].clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    rec
}

/// Write a batch file in the binary record format with `per_class` examples
/// of each class, classes interleaved so any prefix stays balanced.
pub fn write_class_batch(path: &Path, per_class: usize, seed: u64) -> Result<()> {
    if per_class == 0 {
        return Err(Error::invalid("per_class must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for _ in 0..per_class {
        for class in 0..NUM_CLASSES {
            let img = class_image(class, &mut rng);
            f.write_all(&record_bytes(class as u8, &img)).map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

/// One smooth color texture: per-channel mixtures of low-frequency
/// sinusoids and linear ramps around mid gray, with the color spread scaled
/// by `chroma` (0 = grayscale, 1 = full strength).
pub fn texture_image(size: usize, chroma: f32, rng: &mut impl Rng) -> ImageBuf {
    let mut img = ImageBuf::new(size, size);
    // Three sinusoidal components and a ramp per channel.
    let mut comps = [[0.0f32; 5 * 3]; 3];
    for comp in &mut comps {
        for k in 0..3 {
            comp[k * 3] = rng.random_range(0.08..0.22); // amplitude
            comp[k * 3 + 1] = rng.random_range(1..5) as f32; // fx
            comp[k * 3 + 2] = rng.random_range(0.0..std::f32::consts::TAU); // phase
        }
        comp[9] = rng.random_range(-0.25..0.25); // x ramp
        comp[10] = rng.random_range(-0.25..0.25); // y ramp
    }
    let fy: [[f32; 3]; 3] = {
        let mut f = [[0.0; 3]; 3];
        for row in &mut f {
            for v in row.iter_mut() {
                *v = rng.random_range(1..5) as f32;
            }
        }
        f
    };
    for y in 0..size {
        for x in 0..size {
            let (u, v) = (x as f32 / size as f32, y as f32 / size as f32);
            let mut p = [0.0f32; 3];
            for ch in 0..3 {
                let comp = &comps[ch];
                let mut acc = 0.5 + comp[9] * (u - 0.5) + comp[10] * (v - 0.5);
                for k in 0..3 {
                    let t = std::f32::consts::TAU * (comp[k * 3 + 1] * u + fy[ch][k] * v);
                    acc += comp[k * 3] * (t + comp[k * 3 + 2]).sin();
                }
                p[ch] = acc;
            }
            // Pull channels toward their shared mean to control saturation.
            let mean = (p[0] + p[1] + p[2]) / 3.0;
            for val in &mut p {
                *val = (mean + chroma * (*val - mean)).clamp(0.0, 1.0);
            }
            img.set_pixel(y, x, p);
        }
    }
    img
}

/// Populate a directory with `count` PNG textures whose chroma sweeps from
/// near gray to fully colorful, giving a denoising corpus with a wide
/// saturation range.
pub fn write_texture_corpus(dir: &Path, count: usize, size: usize, seed: u64) -> Result<()> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let chroma = if count == 1 { 1.0 } else { 0.05 + 0.95 * i as f32 / (count - 1) as f32 };
        let img = texture_image(size, chroma, &mut rng);
        save_png(&dir.join(format!("tex_{i:04}.png")), &img)?;
    }
    Ok(())
}
