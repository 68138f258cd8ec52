//! Seed handling.
//!
//! A run is driven by one 64-bit master seed. Every consumer of randomness
//! (hash coefficients, initial vectors, noise draws) gets its own sub-seed
//! from [`derive_seed`], which hashes `(master, stream)` through the
//! SplitMix64 finalizer. Stream ids are plain integers; the constants below
//! name the ranges used inside this crate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Golden-ratio increment of the SplitMix64 sequence.
const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub const STREAM_SKETCH: u64 = 0x1000;
pub const STREAM_INIT: u64 = 0x2000;
pub const STREAM_PLANT: u64 = 0x3000;
pub const STREAM_NOISE: u64 = 0x3001;
pub const STREAM_CORPUS: u64 = 0x4000;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed number `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix(mix(master.wrapping_add(SPLITMIX_GAMMA)) ^ stream.wrapping_mul(SPLITMIX_GAMMA))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, stream: u64) -> Rng {
    rng_from_seed(derive_seed(master, stream))
}
