//! Training-time augmentation: horizontal flips and small zero-padded
//! translations, the standard recipe for 32x32 classification.

use crate::qtensor::ImageBuf;
use rand::Rng;

/// Mirror left-right.
pub fn hflip(img: &ImageBuf) -> ImageBuf {
    let mut out = ImageBuf::new(img.height, img.width);
    for y in 0..img.height {
        for x in 0..img.width {
            out.set_pixel(y, x, img.pixel(y, img.width - 1 - x));
        }
    }
    out
}

/// Translate by (dy, dx), filling exposed borders with zeros.
pub fn shift(img: &ImageBuf, dy: i64, dx: i64) -> ImageBuf {
    let mut out = ImageBuf::new(img.height, img.width);
    for y in 0..img.height as i64 {
        let sy = y - dy;
        if sy < 0 || sy >= img.height as i64 {
            continue;
        }
        for x in 0..img.width as i64 {
            let sx = x - dx;
            if sx < 0 || sx >= img.width as i64 {
                continue;
            }
            out.set_pixel(y as usize, x as usize, img.pixel(sy as usize, sx as usize));
        }
    }
    out
}

/// Flip with probability one half, then translate up to `max_shift` pixels
/// in each axis. Draw order is fixed (flip, dy, dx) so a seeded generator
/// reproduces the augmentation stream.
pub fn random_flip_shift(img: &ImageBuf, max_shift: i64, rng: &mut impl Rng) -> ImageBuf {
    let flipped = if rng.random_bool(0.5) { hflip(img) } else { img.clone() };
    let dy = rng.random_range(-max_shift..=max_shift);
    let dx = rng.random_range(-max_shift..=max_shift);
    if dy == 0 && dx == 0 {
        flipped
    } else {
        shift(&flipped, dy, dx)
    }
}
