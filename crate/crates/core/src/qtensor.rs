//! Containers for quaternion and real feature maps.
//!
//! A [`QFeatureMap`] holds C quaternion channels of an H x W map; each element
//! is a pure quaternion stored as three parts, laid out as (C, 3, H, W) with
//! the part planes contiguous. That layout makes [`QFeatureMap::split_to_real`]
//! a free reinterpretation: the 3C part planes are exactly the channel planes
//! of the equivalent real map, which is what lets quaternion convolutions run
//! as real GEMMs downstream.

use crate::error::{Error, Result};
use crate::num::Real;

/// RGB raster in [0,1], interleaved row-major (H, W, 3). The exchange type
/// between image files and feature maps.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuf {
    pub height: usize,
    pub width: usize,
    /// Length `height * width * 3`, pixel-interleaved r,g,b.
    pub data: Vec<f32>,
}

impl ImageBuf {
    pub fn new(height: usize, width: usize) -> Self {
        ImageBuf { height, width, data: vec![0.0; height * width * 3] }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::shape(format!(
                "image buffer needs {} values for {}x{}, got {}",
                height * width * 3,
                height,
                width,
                data.len()
            )));
        }
        Ok(ImageBuf { height, width, data })
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, y: usize, x: usize, p: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i] = p[0];
        self.data[i + 1] = p[1];
        self.data[i + 2] = p[2];
    }

    /// Clamp every value into [lo, hi]; used at emission time.
    pub fn clamped(mut self, lo: f32, hi: f32) -> Self {
        for v in &mut self.data {
            *v = v.clamp(lo, hi);
        }
        self
    }
}

/// Quaternion feature map: C channels of pure quaternions over an H x W grid,
/// stored as (C, 3, H, W) row-major. Part index 0,1,2 = i,j,k (r,g,b at the
/// input layer).
#[derive(Clone, Debug, PartialEq)]
pub struct QFeatureMap<F> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<F>,
}

impl<F: Real> QFeatureMap<F> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        QFeatureMap { channels, height, width, data: vec![F::zero(); channels * 3 * height * width] }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<F>) -> Result<Self> {
        let need = channels * 3 * height * width;
        if data.len() != need {
            return Err(Error::shape(format!(
                "quaternion map ({channels},{height},{width}) needs {need} values, got {}",
                data.len()
            )));
        }
        Ok(QFeatureMap { channels, height, width, data })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    #[inline]
    fn idx(&self, c: usize, part: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && part < 3 && y < self.height && x < self.width);
        ((c * 3 + part) * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, part: usize, y: usize, x: usize) -> F {
        self.data[self.idx(c, part, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, part: usize, y: usize, x: usize, v: F) {
        let i = self.idx(c, part, y, x);
        self.data[i] = v;
    }

    /// All three parts of one element.
    #[inline]
    pub fn pixel(&self, c: usize, y: usize, x: usize) -> [F; 3] {
        [self.get(c, 0, y, x), self.get(c, 1, y, x), self.get(c, 2, y, x)]
    }

    #[inline]
    pub fn set_pixel(&mut self, c: usize, y: usize, x: usize, v: [F; 3]) {
        self.set(c, 0, y, x, v[0]);
        self.set(c, 1, y, x, v[1]);
        self.set(c, 2, y, x, v[2]);
    }

    /// View the C quaternion channels as 3C real planes. Pure layout
    /// reinterpretation; plane 3c+p is part p of channel c.
    pub fn split_to_real(self) -> RealFeatureMap<F> {
        RealFeatureMap { channels: self.channels * 3, height: self.height, width: self.width, data: self.data }
    }

    /// Inverse of [`split_to_real`]; the real channel count must be divisible
    /// by 3.
    pub fn merge_from_real(map: RealFeatureMap<F>) -> Result<Self> {
        if map.channels % 3 != 0 {
            return Err(Error::shape(format!(
                "cannot group {} real planes into quaternion channels",
                map.channels
            )));
        }
        Ok(QFeatureMap { channels: map.channels / 3, height: map.height, width: map.width, data: map.data })
    }

    /// Flatten to a quaternion vector, channel-major then row-major spatial;
    /// element (c, y, x) lands at index (c*H + y)*W + x with its parts kept
    /// together. This ordering is frozen: dense layers and checkpoints depend
    /// on it.
    pub fn flatten(&self) -> QVector<F> {
        let (c_n, h, w) = (self.channels, self.height, self.width);
        let mut data = vec![F::zero(); c_n * h * w * 3];
        for c in 0..c_n {
            for part in 0..3 {
                for y in 0..h {
                    for x in 0..w {
                        data[((c * h + y) * w + x) * 3 + part] = self.get(c, part, y, x);
                    }
                }
            }
        }
        QVector { len: c_n * h * w, data }
    }

    /// Inverse of [`flatten`] for a known shape.
    pub fn from_qvector(v: &QVector<F>, channels: usize, height: usize, width: usize) -> Result<Self> {
        if v.len() != channels * height * width {
            return Err(Error::shape(format!(
                "vector of {} quaternions cannot fill ({channels},{height},{width})",
                v.len()
            )));
        }
        let mut out = QFeatureMap::zeros(channels, height, width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    out.set_pixel(c, y, x, v.get((c * height + y) * width + x));
                }
            }
        }
        Ok(out)
    }

    /// Replicate the channel dimension `copies` times. The quaternion input
    /// stage of classification presets uses this so its first convolution has
    /// the same fan-in as a 3-channel real one.
    pub fn replicate_channels(&self, copies: usize) -> QFeatureMap<F> {
        let plane = 3 * self.height * self.width;
        let mut data = Vec::with_capacity(self.data.len() * copies);
        for _ in 0..copies {
            data.extend_from_slice(&self.data);
        }
        let _ = plane;
        QFeatureMap { channels: self.channels * copies, height: self.height, width: self.width, data }
    }

    /// Sum gradients flowing back through [`replicate_channels`].
    pub fn fold_replicated(&self, copies: usize) -> Result<QFeatureMap<F>> {
        if self.channels % copies != 0 {
            return Err(Error::shape(format!(
                "cannot fold {} channels into {} copies",
                self.channels, copies
            )));
        }
        let base = self.channels / copies;
        let chunk = base * 3 * self.height * self.width;
        let mut out = QFeatureMap::zeros(base, self.height, self.width);
        for rep in 0..copies {
            for i in 0..chunk {
                out.data[i] += self.data[rep * chunk + i];
            }
        }
        Ok(out)
    }
}

/// Embed an RGB image as a single-channel quaternion map: pixel (r,g,b)
/// becomes the pure quaternion r*i + g*j + b*k. Values must lie in [0,1].
pub fn from_rgb_image<F: Real>(img: &ImageBuf) -> Result<QFeatureMap<F>> {
    for (i, &v) in img.data.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "image value {v} at flat index {i} outside [0,1]"
            )));
        }
    }
    let mut out = QFeatureMap::zeros(1, img.height, img.width);
    for y in 0..img.height {
        for x in 0..img.width {
            let p = img.pixel(y, x);
            out.set_pixel(0, y, x, [F::from_f64(p[0] as f64), F::from_f64(p[1] as f64), F::from_f64(p[2] as f64)]);
        }
    }
    Ok(out)
}

/// Read a single-channel quaternion map back out as an RGB raster. Values are
/// emitted as-is; clamp at the caller if the map came from a network output.
pub fn to_rgb_image<F: Real>(map: &QFeatureMap<F>) -> Result<ImageBuf> {
    if map.channels() != 1 {
        return Err(Error::shape(format!(
            "only single-channel quaternion maps convert to RGB, got {} channels",
            map.channels()
        )));
    }
    let mut img = ImageBuf::new(map.height(), map.width());
    for y in 0..map.height() {
        for x in 0..map.width() {
            let p = map.pixel(0, y, x);
            img.set_pixel(y, x, [p[0].as_f64() as f32, p[1].as_f64() as f32, p[2].as_f64() as f32]);
        }
    }
    Ok(img)
}

/// Real feature map: C planes over an H x W grid, stored (C, H, W) row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RealFeatureMap<F> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<F>,
}

impl<F: Real> RealFeatureMap<F> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        RealFeatureMap { channels, height, width, data: vec![F::zero(); channels * height * width] }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<F>) -> Result<Self> {
        let need = channels * height * width;
        if data.len() != need {
            return Err(Error::shape(format!(
                "real map ({channels},{height},{width}) needs {need} values, got {}",
                data.len()
            )));
        }
        Ok(RealFeatureMap { channels, height, width, data })
    }

    /// Channel planes from an RGB image (HWC to CHW).
    pub fn from_image(img: &ImageBuf) -> Self {
        let mut out = RealFeatureMap::zeros(3, img.height, img.width);
        for y in 0..img.height {
            for x in 0..img.width {
                let p = img.pixel(y, x);
                for c in 0..3 {
                    out.set(c, y, x, F::from_f64(p[c] as f64));
                }
            }
        }
        out
    }

    /// Back to an interleaved RGB raster; requires exactly 3 channels.
    pub fn to_image(&self) -> Result<ImageBuf> {
        if self.channels != 3 {
            return Err(Error::shape(format!(
                "need 3 planes to form an RGB image, got {}",
                self.channels
            )));
        }
        let mut img = ImageBuf::new(self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                img.set_pixel(y, x, [
                    self.get(0, y, x).as_f64() as f32,
                    self.get(1, y, x).as_f64() as f32,
                    self.get(2, y, x).as_f64() as f32,
                ]);
            }
        }
        Ok(img)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> F {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: F) {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Flatten channel-major then row-major; mirrors the quaternion ordering.
    pub fn flatten(&self) -> Vec<F> {
        self.data.clone()
    }
}

/// Vector of N pure quaternions, stored (N, 3) row-major: the three parts of
/// each element stay adjacent. The flat view of this storage is exactly the
/// frozen quaternion-to-real flatten order.
#[derive(Clone, Debug, PartialEq)]
pub struct QVector<F> {
    len: usize,
    data: Vec<F>,
}

impl<F: Real> QVector<F> {
    pub fn zeros(len: usize) -> Self {
        QVector { len, data: vec![F::zero(); len * 3] }
    }

    pub fn from_vec(len: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != len * 3 {
            return Err(Error::shape(format!(
                "quaternion vector of {len} needs {} values, got {}",
                len * 3,
                data.len()
            )));
        }
        Ok(QVector { len, data })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, n: usize) -> [F; 3] {
        let i = n * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, n: usize, v: [F; 3]) {
        let i = n * 3;
        self.data[i] = v[0];
        self.data[i + 1] = v[1];
        self.data[i + 2] = v[2];
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_image() -> ImageBuf {
        let mut img = ImageBuf::new(2, 3);
        for y in 0..2 {
            for x in 0..3 {
                img.set_pixel(y, x, [
                    (y as f32) * 0.3,
                    (x as f32) * 0.25,
                    ((y + x) as f32) * 0.125,
                ]);
            }
        }
        img
    }

    #[test]
    fn rgb_round_trip_is_exact() {
        let img = sample_image();
        let q: QFeatureMap<f32> = from_rgb_image(&img).unwrap();
        assert_eq!(to_rgb_image(&q).unwrap(), img);
        // Double precision widens exactly, so the round trip stays exact.
        let q64: QFeatureMap<f64> = from_rgb_image(&img).unwrap();
        assert_eq!(to_rgb_image(&q64).unwrap(), img);
    }

    #[test]
    fn out_of_range_image_rejected() {
        let mut img = sample_image();
        img.data[4] = 1.5;
        assert!(from_rgb_image::<f32>(&img).is_err());
        img.data[4] = -0.1;
        assert!(from_rgb_image::<f32>(&img).is_err());
    }

    #[test]
    fn to_rgb_requires_single_channel() {
        let q = QFeatureMap::<f32>::zeros(2, 4, 4);
        assert!(to_rgb_image(&q).is_err());
    }

    #[test]
    fn split_merge_round_trip() {
        let mut q = QFeatureMap::<f64>::zeros(2, 3, 3);
        let mut v = 0.0;
        for c in 0..2 {
            for p in 0..3 {
                for y in 0..3 {
                    for x in 0..3 {
                        q.set(c, p, y, x, v);
                        v += 1.0;
                    }
                }
            }
        }
        let orig = q.clone();
        let real = q.split_to_real();
        assert_eq!(real.channels(), 6);
        // Plane 3c+p of the real view is part p of channel c.
        assert_eq!(real.get(4, 2, 1), orig.get(1, 1, 2, 1));
        let back = QFeatureMap::merge_from_real(real).unwrap();
        assert_eq!(back, orig);
    }

    #[test]
    fn merge_requires_multiple_of_three() {
        let r = RealFeatureMap::<f32>::zeros(4, 2, 2);
        assert!(QFeatureMap::merge_from_real(r).is_err());
    }

    #[test]
    fn flatten_order_is_channel_major_with_parts_adjacent() {
        let mut q = QFeatureMap::<f32>::zeros(2, 1, 2);
        // Element (c, y, x) carries parts (base, base+0.1, base+0.2).
        for c in 0..2 {
            for x in 0..2 {
                let base = (c * 2 + x) as f32;
                q.set_pixel(c, 0, x, [base, base + 0.1, base + 0.2]);
            }
        }
        let v = q.flatten();
        assert_eq!(v.len(), 4);
        for n in 0..4 {
            let got = v.get(n);
            assert_eq!(got[0], n as f32);
            assert!((got[1] - (n as f32 + 0.1)).abs() < 1e-6);
            assert!((got[2] - (n as f32 + 0.2)).abs() < 1e-6);
        }
        // Flat storage interleaves parts per element.
        assert_eq!(v.as_slice()[..4], [0.0, 0.1, 0.2, 1.0]);
        let back = QFeatureMap::from_qvector(&v, 2, 1, 2).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn replicate_then_fold_scales_by_copies() {
        let mut q = QFeatureMap::<f64>::zeros(1, 2, 2);
        for (i, v) in q.as_mut_slice().iter_mut().enumerate() {
            *v = i as f64;
        }
        let r = q.replicate_channels(3);
        assert_eq!(r.channels(), 3);
        assert_eq!(r.pixel(0, 1, 1), r.pixel(2, 1, 1));
        let folded = r.fold_replicated(3).unwrap();
        for (a, b) in folded.as_slice().iter().zip(q.as_slice()) {
            assert_eq!(*a, b * 3.0);
        }
    }

    #[test]
    fn from_vec_length_checked() {
        assert!(QFeatureMap::<f32>::from_vec(1, 2, 2, vec![0.0; 11]).is_err());
        assert!(RealFeatureMap::<f32>::from_vec(2, 2, 2, vec![0.0; 7]).is_err());
        assert!(QVector::<f32>::from_vec(3, vec![0.0; 8]).is_err());
        assert!(ImageBuf::from_vec(2, 2, vec![0.0; 11]).is_err());
    }
}
