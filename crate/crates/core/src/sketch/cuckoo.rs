use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{seeded_index, SketchError};
use crate::encoding::ElementDigest;

pub const DEFAULT_MAX_KICKS: usize = 500;
pub const DEFAULT_STASH: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CuckooInsert {
    /// Stored in a bin, possibly after relocating others.
    Placed,
    /// The walk ran out of kicks and the homeless element went to the stash.
    Stashed,
    AlreadyPresent,
}

/// Single-slot cuckoo hash table with random-walk insertion and a stash.
///
/// Candidate bin `j` of `x` is `SipHash24(key = (table key, j), x) mod bins`.
/// Lookups probe at most `num_hashes` bins plus the stash.
#[derive(Clone, Debug)]
pub struct CuckooTable {
    num_hashes: usize,
    key: u64,
    bins: Vec<Option<ElementDigest>>,
    stash: Vec<ElementDigest>,
    stash_capacity: usize,
    max_kicks: usize,
    len: usize,
    rng: ChaCha20Rng,
}

impl CuckooTable {
    /// Table with the default kick bound and stash. `seed` fixes both the
    /// hash key and the eviction walk.
    pub fn new(num_bins: usize, num_hashes: usize, seed: u64) -> Result<Self, SketchError> {
        Self::with_limits(num_bins, num_hashes, seed, DEFAULT_MAX_KICKS, DEFAULT_STASH)
    }

    /// Table sized to hold `expected` elements at the given load factor.
    pub fn for_load(expected: usize, load: f64, num_hashes: usize, seed: u64) -> Result<Self, SketchError> {
        if !(load > 0.0 && load <= 1.0) {
            return Err(SketchError::Parameter(format!("load factor {load} outside (0, 1]")));
        }
        Self::new((expected as f64 / load).ceil().max(1.0) as usize, num_hashes, seed)
    }

    pub fn with_limits(
        num_bins: usize,
        num_hashes: usize,
        seed: u64,
        max_kicks: usize,
        stash_capacity: usize,
    ) -> Result<Self, SketchError> {
        if num_bins == 0 {
            return Err(SketchError::Parameter("table needs at least one bin".into()));
        }
        if num_hashes < 2 {
            return Err(SketchError::Parameter("cuckoo hashing needs at least two hash functions".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Ok(CuckooTable {
            num_hashes,
            key: rng.gen(),
            bins: vec![None; num_bins],
            stash: Vec::new(),
            stash_capacity,
            max_kicks,
            len: 0,
            rng,
        })
    }

    pub fn num_hashes(&self) -> usize {
        self.num_hashes
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stash(&self) -> &[ElementDigest] {
        &self.stash
    }

    pub fn load_factor(&self) -> f64 {
        self.len as f64 / self.bins.len() as f64
    }

    /// The candidate bins of `x` in hash order.
    pub fn candidates(&self, x: &ElementDigest) -> Vec<usize> {
        (0..self.num_hashes as u64).map(|j| seeded_index(self.key, j, x.as_bytes(), self.bins.len())).collect()
    }

    pub fn contains(&self, x: &ElementDigest) -> bool {
        self.probe(x).0
    }

    /// Membership plus the number of bin and stash slots examined.
    pub fn probe(&self, x: &ElementDigest) -> (bool, usize) {
        let mut probes = 0;
        for b in self.candidates(x) {
            probes += 1;
            if self.bins[b].as_ref() == Some(x) {
                return (true, probes);
            }
        }
        for s in &self.stash {
            probes += 1;
            if s == x {
                return (true, probes);
            }
        }
        (false, probes)
    }

    /// Inserts `x`. On `TableFull` the stash overflowed: the table holds `x`
    /// but has lost some earlier element and must be rebuilt larger.
    pub fn insert(&mut self, x: ElementDigest) -> Result<CuckooInsert, SketchError> {
        if self.contains(&x) {
            return Ok(CuckooInsert::AlreadyPresent);
        }
        let mut current = x;
        let mut came_from = None;
        for _ in 0..=self.max_kicks {
            let candidates = self.candidates(&current);
            if let Some(&free) = candidates.iter().find(|&&b| self.bins[b].is_none()) {
                self.bins[free] = Some(current);
                self.len += 1;
                return Ok(CuckooInsert::Placed);
            }
            let choices: Vec<usize> = candidates.iter().copied().filter(|&b| Some(b) != came_from).collect();
            let victim_bin = if choices.is_empty() {
                candidates[0]
            } else {
                choices[self.rng.gen_range(0..choices.len())]
            };
            current = self.bins[victim_bin].replace(current).expect("occupied bin");
            came_from = Some(victim_bin);
        }
        if self.stash.len() < self.stash_capacity {
            self.stash.push(current);
            self.len += 1;
            Ok(CuckooInsert::Stashed)
        } else {
            Err(SketchError::TableFull)
        }
    }
}
