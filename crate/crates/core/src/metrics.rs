//! Evaluation metrics and the two CSV report formats.
//!
//! Color metrics treat a pixel as a vector in RGB space: saturation is
//! (max - min) / max, and the gray angle is the angle between the pixel and
//! the gray axis (1,1,1). Reconstruction quality is peak signal-to-noise
//! ratio against a peak of 1.0.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::qtensor::ImageBuf;
use std::fs;
use std::path::Path;

/// Index of the largest element; ties break low. Panics on empty input.
pub fn argmax<F: Real>(v: &[F]) -> usize {
    assert!(!v.is_empty(), "argmax of empty slice");
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of predictions matching their labels.
pub fn accuracy(pred: &[usize], labels: &[u8]) -> f64 {
    assert_eq!(pred.len(), labels.len());
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| **p == **l as usize).count();
    hits as f64 / pred.len() as f64
}

/// Peak signal-to-noise ratio in dB between two equal-length signals with
/// peak value 1.0. Identical inputs give positive infinity.
pub fn psnr(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    let mse = acc / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// PSNR between two images of equal size.
pub fn image_psnr(a: &ImageBuf, b: &ImageBuf) -> Result<f64> {
    if a.height != b.height || a.width != b.width {
        return Err(Error::shape(format!(
            "psnr needs equal sizes, got {}x{} and {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(psnr(&a.data, &b.data))
}

/// Mean over pixels of (max - min) / max; all-black pixels count zero.
pub fn mean_saturation(img: &ImageBuf) -> f64 {
    let n = img.height * img.width;
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0f64;
    for i in 0..n {
        let p = &img.data[i * 3..i * 3 + 3];
        let max = p[0].max(p[1]).max(p[2]);
        let min = p[0].min(p[1]).min(p[2]);
        if max > 0.0 {
            acc += ((max - min) / max) as f64;
        }
    }
    acc / n as f64
}

/// Mean over pixels of the angle (radians) between the RGB vector and the
/// gray axis; zero pixels count zero.
pub fn mean_gray_angle(img: &ImageBuf) -> f64 {
    let n = img.height * img.width;
    if n == 0 {
        return 0.0;
    }
    let inv_sqrt3 = 1.0f64 / 3.0f64.sqrt();
    let mut acc = 0.0f64;
    for i in 0..n {
        let p = &img.data[i * 3..i * 3 + 3];
        let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
        let norm = (r * r + g * g + b * b).sqrt();
        if norm > 0.0 {
            let cos = ((r + g + b) * inv_sqrt3 / norm).clamp(-1.0, 1.0);
            acc += cos.acos();
        }
    }
    acc / n as f64
}

/// One row of a training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_metric: f64,
    pub wall_secs: f64,
}

/// One row of a per-image model comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRecord {
    pub image_id: String,
    /// Mean saturation of the clean image.
    pub saturation: f64,
    /// Mean gray-axis angle of the clean image, radians.
    pub gray_angle: f64,
    pub psnr_real: f64,
    pub psnr_quat: f64,
}

impl ComparisonRecord {
    /// The headline gap: positive when the real model reconstructs better.
    pub fn difference(&self) -> f64 {
        self.psnr_real - self.psnr_quat
    }
}

/// Render with six significant digits; infinities print as inf.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    let decimals = (5 - x.abs().log10().floor() as i64).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Write `epoch,train_loss,eval_metric,wall_secs` rows.
pub fn write_epoch_csv(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let mut out = String::from("epoch,train_loss,eval_metric,wall_secs\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch,
            sig6(r.train_loss),
            sig6(r.eval_metric),
            sig6(r.wall_secs)
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write `image_id,S,A,psnr_real,psnr_quat,D` rows, where S is saturation,
/// A the gray angle, and D the real-minus-quaternion PSNR gap.
pub fn write_comparison_csv(path: &Path, records: &[ComparisonRecord]) -> Result<()> {
    let mut out = String::from("image_id,S,A,psnr_real,psnr_quat,D\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.image_id,
            sig6(r.saturation),
            sig6(r.gray_angle),
            sig6(r.psnr_real),
            sig6(r.psnr_quat),
            sig6(r.difference())
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(p: [f32; 3]) -> ImageBuf {
        let mut img = ImageBuf::new(2, 2);
        for y in 0..2 {
            for x in 0..2 {
                img.set_pixel(y, x, p);
            }
        }
        img
    }

    #[test]
    fn argmax_and_accuracy() {
        assert_eq!(argmax(&[0.1f32, 0.9, 0.3]), 1);
        assert_eq!(argmax(&[5.0f32, 5.0, 1.0]), 0); // tie breaks low
        assert_eq!(accuracy(&[1, 2, 3, 0], &[1, 2, 0, 0]), 0.75);
    }

    #[test]
    fn psnr_known_values() {
        // Uniform squared error of 0.01 gives exactly 20 dB.
        let a = vec![0.5f32; 100];
        let b = vec![0.6f32; 100];
        let p = psnr(&a, &b);
        assert!((p - 20.0).abs() < 1e-4, "{p}");
        assert!(psnr(&a, &a).is_infinite());

        let img = solid([0.2, 0.4, 0.8]);
        assert!(image_psnr(&img, &img).unwrap().is_infinite());
        assert!(image_psnr(&img, &ImageBuf::new(3, 3)).is_err());
    }

    #[test]
    fn saturation_extremes() {
        assert!((mean_saturation(&solid([0.7, 0.7, 0.7])) - 0.0).abs() < 1e-12);
        assert!((mean_saturation(&solid([0.9, 0.0, 0.0])) - 1.0).abs() < 1e-12);
        assert!((mean_saturation(&solid([0.0, 0.0, 0.0])) - 0.0).abs() < 1e-12);
        // (max-min)/max = (0.8-0.2)/0.8.
        assert!((mean_saturation(&solid([0.8, 0.2, 0.5])) - 0.75).abs() < 1e-6);
    }

    #[test]
    fn gray_angle_extremes() {
        assert!(mean_gray_angle(&solid([0.3, 0.3, 0.3])) < 1e-6);
        // A pure channel sits at arccos(1/sqrt(3)) from the gray axis.
        let expect = (1.0f64 / 3.0f64.sqrt()).acos();
        assert!((mean_gray_angle(&solid([0.5, 0.0, 0.0])) - expect).abs() < 1e-6);
        assert_eq!(mean_gray_angle(&solid([0.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.123456789), "0.123457");
        assert_eq!(sig6(123.456789), "123.457");
        assert_eq!(sig6(42.0), "42.0000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::INFINITY), "inf");
        assert_eq!(sig6(-0.000123456789), "-0.000123457");
    }

    #[test]
    fn csv_formats_are_frozen() {
        let dir = tempfile::tempdir().unwrap();
        let epochs = dir.path().join("epochs.csv");
        write_epoch_csv(
            &epochs,
            &[
                EpochRecord { epoch: 1, train_loss: 2.30259, eval_metric: 0.1, wall_secs: 0.0 },
                EpochRecord { epoch: 2, train_loss: 1.5, eval_metric: 0.42, wall_secs: 12.25 },
            ],
        )
        .unwrap();
        let text = fs::read_to_string(&epochs).unwrap();
        assert_eq!(
            text,
            "epoch,train_loss,eval_metric,wall_secs\n1,2.30259,0.100000,0\n2,1.50000,0.420000,12.2500\n"
        );

        let cmp = dir.path().join("cmp.csv");
        write_comparison_csv(
            &cmp,
            &[ComparisonRecord {
                image_id: "tex_0001".into(),
                saturation: 0.5,
                gray_angle: 0.25,
                psnr_real: 21.5,
                psnr_quat: 23.0,
            }],
        )
        .unwrap();
        let text = fs::read_to_string(&cmp).unwrap();
        assert_eq!(
            text,
            "image_id,S,A,psnr_real,psnr_quat,D\ntex_0001,0.500000,0.250000,21.5000,23.0000,-1.50000\n"
        );
    }
}
