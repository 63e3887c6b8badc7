//! Seed derivation.
//!
//! Every stochastic draw in the crate comes from a stream derived from one
//! master seed plus a tag path such as `(purpose, iteration, candidate)`.
//! Streams are independent of evaluation order, so a result computed on
//! one thread or many is bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. The numeric values are part of the reproducibility
/// contract: changing them changes every seeded result.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const ITERATION: u64 = 2;
    pub const OFFSPRING: u64 = 3;
    pub const PSO: u64 = 4;
    pub const RPC: u64 = 5;
    pub const TRIAL: u64 = 6;
    pub const ORACLE: u64 = 7;
    pub const PROBE: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a tag path into a 64-bit stream key.
pub fn derive_key(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// Returns the generator for the stream identified by `tags` under `master`.
pub fn stream(master: u64, tags: &[u64]) -> StreamRng {
    let key = derive_key(master, tags);
    let mut seed = [0u8; 32];
    let mut word = key;
    for chunk in seed.chunks_mut(8) {
        word = splitmix64(word);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
