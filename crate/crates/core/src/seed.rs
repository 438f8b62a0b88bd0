//! Seed derivation.
//!
//! Every random draw in the pipeline comes from a generator seeded by
//! [`stable_hash`] over the global seed and the identity of the work item,
//! so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Hashes `(seed, id, index)` into a 64-bit seed. Stable across platforms
/// and compiler versions.
pub fn stable_hash(seed: u64, id: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((id.len() as u64).to_le_bytes());
    hasher.update(id.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for a named stream derived from a global seed.
pub fn stream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    rng(stable_hash(seed, name, index))
}
