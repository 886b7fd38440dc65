//! Root-seed expansion.
//!
//! Every randomized stage draws its RNG from `SHA-256(root_seed_le || stage)`,
//! truncated to the first eight bytes (little endian). Stages can therefore be
//! rerun in isolation and still see the same random stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stage_rng(root: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stage_seed(root, stage))
}
