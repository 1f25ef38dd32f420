//! Seeded randomness.
//!
//! Every random stream in the crate is a ChaCha8 generator (RFC 7539 block
//! function reduced to 8 rounds, as implemented by `rand_chacha`) seeded
//! from a 64-bit seed, so runs replay identically across platforms.
//! Independent streams for one run are derived with [`derive_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes `seed` with a stream label using the SplitMix64 finalizer.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn unit(rng: &mut RunRng) -> f64 {
    rng.gen::<f64>()
}

/// Standard normal draw (Box-Muller, one variate per call).
pub fn standard_normal(rng: &mut RunRng) -> f64 {
    // 1 - U keeps the log argument in (0, 1].
    let u1 = 1.0 - unit(rng);
    let u2 = unit(rng);
    crate::math::sqrt(-2.0 * crate::math::ln(u1)) * crate::math::cos(core::f64::consts::TAU * u2)
}
