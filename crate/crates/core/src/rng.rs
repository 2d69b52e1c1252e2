//! Seeded, portable random streams.
//!
//! Every stochastic routine takes an integer seed and builds a
//! [`ChaCha8Rng`] from it. Independent consumers derive their own seed from a
//! parent seed and a text label, so adding a consumer never shifts another
//! consumer's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child seed for `label` under `seed`: the first 8 bytes (little endian) of
/// `SHA-256(seed_le || label)`.
pub fn substream_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn substream(seed: u64, label: &str) -> StreamRng {
    stream(substream_seed(seed, label))
}
