//! Stable seed derivation.
//!
//! Every random stream in the crate is seeded from a SHA-256 digest of its
//! coordinates, so results do not depend on platform hashers or on the order
//! in which streams are created.

use sha2::{Digest, Sha256};

/// Mixes a sequence of integers into one 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}
