//! Seeded, splittable randomness.
//!
//! All stochastic choices in this crate flow through one named generator,
//! ChaCha8, so that every result is a pure function of the seeds recorded in
//! config structs. Independent substreams are obtained from ChaCha's 64-bit
//! stream field: `substream(seed, i)` and `substream(seed, j)` never overlap
//! for `i != j`, which lets the synthetic generator draw sample `i` without
//! consuming state that sample `j` depends on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// An independent RNG substream identified by `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; used to derive child seeds from a parent seed and a
/// role tag without correlating the resulting streams.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from `(seed, tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}
