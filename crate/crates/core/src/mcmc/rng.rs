//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator seeded with
//! `splitmix64(seed ^ splitmix64(stream))`. `splitmix64` is a bijection on
//! `u64`, so distinct stream indices under one seed always get distinct
//! generator seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// The splitmix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    ChainRng::seed_from_u64(derive_seed(seed, stream))
}
