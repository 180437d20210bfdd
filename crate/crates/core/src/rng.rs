//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! whose seed is derived from a root seed plus a stream tag, so adding a new
//! consumer never perturbs existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and an integer stream index.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ stream.rotate_left(17))
}

/// Stable 64-bit hash of a string (first eight bytes of SHA-256).
pub fn hash_str(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    Rng::seed_from_u64(derive(seed, stream))
}

pub fn keyed(seed: u64, key: &str) -> Rng {
    Rng::seed_from_u64(derive(seed, hash_str(key)))
}
