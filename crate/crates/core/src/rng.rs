//! Seeded randomness.
//!
//! Sequential sampling (graph generation, cost parameters) uses ChaCha8.
//! Per-round draws that must be random-access (link failures, link delays)
//! use a counter-based hash of `(seed, stream, round, key)` instead, so any
//! round can be re-queried without replaying history.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream tag for link-failure draws.
pub const STREAM_FAILURE: u64 = 0x6c69_6e6b_6661_696c;
/// Stream tag for link-delay draws.
pub const STREAM_DELAY: u64 = 0x6c69_6e6b_6465_6c79;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on `[0, 1)` with 53 bits of resolution.
pub fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    bits_to_unit(rng.next_u64())
}

/// Uniform on `(lo, hi]`.
pub fn half_open_above<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    hi - (hi - lo) * unit_f64(rng)
}

/// Uniform on `[lo, hi)`.
pub fn uniform<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_f64(rng)
}

#[inline]
pub fn bits_to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based hash of a `(seed, stream, round, key)` tuple.
#[inline]
pub fn counter_hash(seed: u64, stream: u64, round: u64, key: u64) -> u64 {
    let mut h = mix64(seed ^ stream);
    h = mix64(h ^ round);
    mix64(h ^ key)
}

/// Uniform on `[0, 1)` drawn from [`counter_hash`].
#[inline]
pub fn counter_unit(seed: u64, stream: u64, round: u64, key: u64) -> f64 {
    bits_to_unit(counter_hash(seed, stream, round, key))
}

/// Derives a named sub-seed from a master seed.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the master seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(master ^ mix64(h))
}
