//! Seed derivation and counter-based Gaussian draws.
//!
//! Every random quantity in a rollout is addressed by a tuple of integers
//! (seed, time, agent, stream, ...) rather than drawn from a shared stateful
//! generator, so trajectories do not depend on the order in which agents or
//! threads consume randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream tags that keep independent noise sources apart.
pub mod stream {
    pub const ENV_NOISE: u64 = 0x11;
    pub const ACTION: u64 = 0x22;
    pub const NEXT_ACTION: u64 = 0x33;
    pub const RESET: u64 = 0x44;
    pub const FEATURES: u64 = 0x55;
    pub const EPISODE: u64 = 0x66;
    pub const PROBE: u64 = 0x77;
    pub const ENV_PARAMS: u64 = 0x88;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash an ordered tuple of integers into a single 64-bit key.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A fresh generator addressed by `parts`.
pub fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(parts))
}

/// One standard normal draw addressed by `parts`.
pub fn gaussian(parts: &[u64]) -> f64 {
    StandardNormal.sample(&mut rng_for(parts))
}

/// Fill `out` with standard normals addressed by `parts`.
pub fn gaussians(parts: &[u64], out: &mut [f64]) {
    let mut rng = rng_for(parts);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}
