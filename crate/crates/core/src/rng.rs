//! Seed derivation and the generator used throughout the crate.
//!
//! Every random stream is a [`ChaCha8Rng`] seeded from a 64-bit value. Child
//! seeds are derived from a master seed and a textual label as the first eight
//! bytes (little endian) of
//! `SHA-256("tolrerm/seed/v1" || master.to_le_bytes() || label)`.
//! Distinct labels therefore give independent, reproducible substreams, and a
//! master of 0 is as good as any other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The crate-wide random generator.
pub type LabRng = ChaCha8Rng;

const DOMAIN_TAG: &[u8] = b"tolrerm/seed/v1";

/// Derives an independent child seed from `master` and `label`.
pub fn seed_derive(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN_TAG);
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Child seed for the `index`-th member of a labelled family (trial, task, ...).
pub fn seed_derive_indexed(master: u64, label: &str, index: u64) -> u64 {
    seed_derive(master, &format!("{label}/{index}"))
}

pub fn rng_from_seed(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shorthand for `rng_from_seed(seed_derive(master, label))`.
pub fn derived_rng(master: u64, label: &str) -> LabRng {
    rng_from_seed(seed_derive(master, label))
}
