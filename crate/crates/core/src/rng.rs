//! Named PRNG substreams derived from a single seed.
//!
//! Each stream is keyed by `(seed, name, index)`, so adding draws to one
//! stream never shifts another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const CHAIN: &str = "chain";
pub const SELECTION: &str = "selection";
pub const AGENTS: &str = "agents";
pub const REPETITION: &str = "repetition";

pub fn substream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// A child seed, for example the chain seed of one repetition.
pub fn derive_seed(seed: u64, name: &str, index: u64) -> u64 {
    substream(seed, name, index).next_u64()
}
