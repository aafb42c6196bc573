//! Probabilistic set structures and their PSI uses.
//!
//! All three structures derive their indices the same way: SipHash-2-4 keyed
//! with `(key, seed)` where `seed` is the index number (Bloom hash, cuckoo
//! candidate or Count-Min row).

use std::hash::Hasher;

use siphasher::sip::SipHasher24;
use thiserror::Error;

mod bloom;
mod count_min;
mod cuckoo;

pub use bloom::{bloom_fpr_estimate, bloom_psi, optimal_bloom_params, private_bloom_psi, private_bloom_publish, BloomFilter, BLOOM_HASH_KEY, BLOOM_MAGIC};
pub use count_min::{cm_cooccurrence_count, CountMinSketch};
pub use cuckoo::{CuckooInsert, CuckooTable, DEFAULT_MAX_KICKS, DEFAULT_STASH};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SketchError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed serialized filter: {0}")]
    Format(String),
    #[error("cuckoo table full; rebuild with more bins")]
    TableFull,
}

/// One 64-bit keyed hash per `(key, seed)` pair.
pub fn seeded_hash(key: u64, seed: u64, bytes: &[u8]) -> u64 {
    let mut h = SipHasher24::new_with_keys(key, seed);
    h.write(bytes);
    h.finish()
}

/// Index in `[0, range)` for the given seed.
pub(crate) fn seeded_index(key: u64, seed: u64, bytes: &[u8], range: usize) -> usize {
    (seeded_hash(key, seed, bytes) % range as u64) as usize
}
