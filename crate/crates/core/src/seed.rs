//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a base seed
//! mixed with a few stream-specific words, so that e.g. positive sampling for
//! one sample never depends on where that sample sits in its batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(base: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(mix64(base), |acc, &w| mix64(acc ^ mix64(w)))
}

pub fn rng(base: u64, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, words))
}

/// Stream tags, so distinct consumers of one seed never share a stream.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const POSITIVES: u64 = 4;
    pub const RANDOM_ASSIGN: u64 = 5;
    pub const CLASSIFIER: u64 = 6;
    pub const PROTOTYPES: u64 = 7;
    pub const TRAIN_SAMPLES: u64 = 8;
    pub const TEST_SAMPLES: u64 = 9;
    pub const HIERARCHY: u64 = 10;
    pub const TARGETS: u64 = 11;
}
