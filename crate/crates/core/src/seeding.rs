//! Deterministic RNG stream derivation.
//!
//! Every command takes one master seed; everything downstream draws from
//! ChaCha8 streams derived here. A (seed, stream) pair fully determines the
//! random bytes, so ensembles and splits are reproducible regardless of
//! evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the independent random roles inside one run.
pub const STREAM_INIT: u64 = 1;
pub const STREAM_SHUFFLE: u64 = 2;
pub const STREAM_SPLIT: u64 = 3;
pub const STREAM_NOISE: u64 = 4;
pub const STREAM_ENSEMBLE: u64 = 5;
pub const STREAM_FOLDS: u64 = 6;
pub const STREAM_NULL: u64 = 7;

/// SplitMix64 step; used to decorrelate derived seeds.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and an index (e.g. a split id).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

/// ChaCha8 generator for a (seed, stream) pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
