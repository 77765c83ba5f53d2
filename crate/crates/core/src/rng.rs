//! Counter-based seed derivation.
//!
//! Every random stream in a search is derived from one root seed plus a path
//! of integer labels (problem id, decode step, simulation index, ...). Streams
//! never depend on how many draws another stream consumed, so problems can run
//! in any order or in parallel and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Stream labels used inside a single search.
pub mod label {
    pub const ROOT: u64 = 0x524f_4f54;
    pub const SIMULATION: u64 = 0x5349_4d55;
    pub const STEP: u64 = 0x5354_4550;
    pub const PROBLEM: u64 = 0x5052_4f42;
    pub const VALUE_NOISE: u64 = 0x564e_4f49;
    pub const ROLLOUT: u64 = 0x524f_4c4c;
    pub const FINAL: u64 = 0x4649_4e41;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and an ordered list of labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// A ChaCha8 stream for `(seed, labels...)`.
pub fn stream(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, labels))
}

/// Stable 64-bit key for a piece of text (independent of the Rust version).
pub fn text_key(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
