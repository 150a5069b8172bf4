//! Reproducible RNG streams.
//!
//! All randomness flows from one root seed. Independent work units (groups,
//! bootstrap replicates, study datasets) get child streams derived through a
//! splitmix64 counter scheme, so parallel execution order never affects
//! results.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// splitmix64 step; good avalanche, standard constants.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream tag.
pub fn child_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag.wrapping_add(0x51a9_b2c3_d4e5_f607)))
}

/// Deterministic stream for a path of tags under the root seed.
pub fn stream(root: u64, path: &[u64]) -> ChaCha8Rng {
    let seed = path.iter().fold(root, |acc, &tag| child_seed(acc, tag));
    ChaCha8Rng::seed_from_u64(seed)
}
