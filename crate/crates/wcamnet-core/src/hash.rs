//! Stable hashing and deterministic RNG stream derivation.
//!
//! FNV-1a is used for config provenance hashes and stream labels because its
//! output must stay stable across library versions and platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Provenance hash of any serializable config, rendered as fixed-width hex.
pub fn config_hash<T: serde::Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializable");
    format!("{:016x}", fnv1a_64(&json))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Independent named RNG stream for a run seed. Distinct tags give
/// decorrelated streams; the same (seed, tag) always gives the same stream.
pub fn stream_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed) ^ fnv1a_64(tag.as_bytes()))
}

/// Per-sample RNG for data augmentation: depends only on (seed, epoch,
/// index), never on worker count or scheduling.
pub fn sample_rng(seed: u64, epoch: u64, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(seed)
        ^ splitmix64(epoch.wrapping_mul(0x9e3779b97f4a7c15))
        ^ splitmix64(index.wrapping_add(0x6a09e667f3bcc909));
    ChaCha8Rng::seed_from_u64(mixed)
}
