//! Seed mixing and the deterministic generator used everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser (Steele, Lea & Flood 2014).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and two stream indices:
/// `splitmix64(parent ^ splitmix64((a << 32) | b))`.
///
/// `b` is truncated to 32 bits.
pub fn mix(parent: u64, a: u64, b: u64) -> u64 {
    splitmix64(parent ^ splitmix64((a << 32) | (b & 0xFFFF_FFFF)))
}

/// A platform-independent generator seeded from a 64-bit value.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
