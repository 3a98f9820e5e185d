pub mod audit;
pub mod denoise;
pub mod eval;
pub mod gradcheck;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// All corruption draws derive from the run seed the same way, so `train`,
/// `eval`, and `denoise` given the same seed corrupt the same pixels.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973)
}
