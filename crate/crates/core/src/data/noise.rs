//! Synthetic corruption for denoising experiments: whole-pixel salt and
//! pepper over a fixed fraction of sites, followed by additive Gaussian
//! noise, clamped back into [0,1].

use crate::qtensor::ImageBuf;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Corruption strengths. The defaults match the denoising experiments:
/// 30% of pixels blanked to black or white, then sigma 0.1 Gaussian noise.
#[derive(Clone, Copy, Debug)]
pub struct NoiseConfig {
    /// Fraction of pixel sites (not scalars) forced to 0 or 1.
    pub pixel_fraction: f64,
    /// Standard deviation of the additive Gaussian term.
    pub sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { pixel_fraction: 0.3, sigma: 0.1 }
    }
}

/// Corrupt one image. Exactly `floor(fraction * H * W)` distinct pixels are
/// chosen; each becomes all-black or all-white with even odds (dropping the
/// whole color, not single channels). Gaussian noise then perturbs every
/// scalar, and the result is clamped to [0,1].
pub fn corrupt(img: &ImageBuf, cfg: &NoiseConfig, rng: &mut impl Rng) -> ImageBuf {
    let mut out = img.clone();
    let sites = img.height * img.width;
    let hits = (cfg.pixel_fraction * sites as f64).floor() as usize;
    let chosen = rand::seq::index::sample(rng, sites, hits.min(sites));
    for site in chosen {
        let v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let i = site * 3;
        out.data[i] = v;
        out.data[i + 1] = v;
        out.data[i + 2] = v;
    }
    if cfg.sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.sigma).expect("sigma is finite and non-negative");
        for v in &mut out.data {
            *v += normal.sample(rng) as f32;
        }
    }
    out.clamped(0.0, 1.0)
}

/// Corrupt a whole set, pairing each noisy image with its clean original.
pub fn corrupt_pairs(
    clean: &[ImageBuf],
    cfg: &NoiseConfig,
    rng: &mut impl Rng,
) -> Vec<(ImageBuf, ImageBuf)> {
    clean.iter().map(|img| (corrupt(img, cfg, rng), img.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gray(h: usize, w: usize, v: f32) -> ImageBuf {
        let mut img = ImageBuf::new(h, w);
        for d in &mut img.data {
            *d = v;
        }
        img
    }

    #[test]
    fn exact_pixel_count_is_blanked() {
        let img = gray(20, 20, 0.5);
        let cfg = NoiseConfig { pixel_fraction: 0.3, sigma: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noisy = corrupt(&img, &cfg, &mut rng);
        let mut blanked = 0;
        for y in 0..20 {
            for x in 0..20 {
                let p = noisy.pixel(y, x);
                if p == [0.0; 3] || p == [1.0; 3] {
                    // Whole pixel dropped together.
                    blanked += 1;
                } else {
                    assert_eq!(p, [0.5; 3]);
                }
            }
        }
        assert_eq!(blanked, 120); // floor(0.3 * 400)
    }

    #[test]
    fn both_polarities_occur() {
        let img = gray(20, 20, 0.5);
        let cfg = NoiseConfig { pixel_fraction: 0.5, sigma: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noisy = corrupt(&img, &cfg, &mut rng);
        let whites = noisy.data.iter().filter(|&&v| v == 1.0).count();
        let blacks = noisy.data.iter().filter(|&&v| v == 0.0).count();
        assert!(whites > 0 && blacks > 0);
    }

    #[test]
    fn gaussian_noise_stays_clamped_and_seeded() {
        let img = gray(16, 16, 0.2);
        let cfg = NoiseConfig::default();
        let a = corrupt(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = corrupt(&img, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(a.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Noise actually moved untouched pixels.
        assert!(a.data.iter().any(|&v| v != 0.2 && v != 0.0 && v != 1.0));
    }

    #[test]
    fn pairs_keep_clean_side_untouched() {
        let clean = vec![gray(8, 8, 0.3), gray(8, 8, 0.7)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pairs = corrupt_pairs(&clean, &NoiseConfig::default(), &mut rng);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].1, clean[0]);
        assert_eq!(pairs[1].1, clean[1]);
        assert_ne!(pairs[0].0, clean[0]);
    }
}
