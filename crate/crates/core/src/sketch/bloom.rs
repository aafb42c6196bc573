use std::collections::BTreeSet;

use num_traits::Zero;

use super::{seeded_index, SketchError};
use crate::crypto::RsaKeyPair;
use crate::encoding::ElementDigest;
use crate::protocol::blind_rsa::{element_value, signature_digest};
use crate::protocol::{ProtocolError, PsiResult, SecureRng};

/// First four bytes of a serialized filter.
pub const BLOOM_MAGIC: [u8; 4] = *b"TPBF";

/// SipHash key shared by every filter so that independently built filters
/// and third-party readers agree on bit positions.
pub const BLOOM_HASH_KEY: u64 = 0x7472_6169_6c70_7369;

const HEADER_LEN: usize = 16;

/// Bit array with `k` seeded hash positions per element.
///
/// Serialized form, all integers little endian:
///
/// | offset | size | field |
/// |---|---|---|
/// | 0 | 4 | magic `TPBF` |
/// | 4 | 4 | `b`, number of bits |
/// | 8 | 4 | `k`, number of hashes |
/// | 12 | 4 | inserted count |
/// | 16 | ceil(b/8) | bits; bit `i` is `1 << (i % 8)` of byte `i / 8` |
///
/// Bit `j` of element `x` is `SipHash24(key = (BLOOM_HASH_KEY, j), x) mod b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomFilter {
    bits: Vec<u8>,
    num_bits: usize,
    num_hashes: u32,
    inserted: u32,
}

impl BloomFilter {
    pub fn new(num_bits: usize, num_hashes: u32) -> Result<Self, SketchError> {
        if num_bits == 0 || num_bits > u32::MAX as usize {
            return Err(SketchError::Parameter(format!("bit count {num_bits} outside 1..2^32")));
        }
        if num_hashes == 0 {
            return Err(SketchError::Parameter("need at least one hash".into()));
        }
        Ok(BloomFilter { bits: vec![0; num_bits.div_ceil(8)], num_bits, num_hashes, inserted: 0 })
    }

    /// Filter sized for `expected` elements at false-positive rate `target`.
    pub fn with_target_fpr(expected: usize, target: f64) -> Result<Self, SketchError> {
        let (b, k) = optimal_bloom_params(expected, target)?;
        Self::new(b, k)
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn num_hashes(&self) -> u32 {
        self.num_hashes
    }

    pub fn inserted(&self) -> u32 {
        self.inserted
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    fn positions<'a>(&'a self, x: &'a ElementDigest) -> impl Iterator<Item = usize> + 'a {
        (0..self.num_hashes).map(move |j| seeded_index(BLOOM_HASH_KEY, u64::from(j), x.as_bytes(), self.num_bits))
    }

    pub fn insert(&mut self, x: &ElementDigest) {
        let positions: Vec<usize> = self.positions(x).collect();
        for i in positions {
            self.bits[i / 8] |= 1 << (i % 8);
        }
        self.inserted = self.inserted.saturating_add(1);
    }

    pub fn contains(&self, x: &ElementDigest) -> bool {
        self.positions(x).all(|i| self.bits[i / 8] & (1 << (i % 8)) != 0)
    }

    /// Estimated false-positive rate at the current fill.
    pub fn estimated_fpr(&self) -> f64 {
        bloom_fpr_estimate(self.num_bits, self.num_hashes, self.inserted as usize)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.bits.len());
        out.extend_from_slice(&BLOOM_MAGIC);
        out.extend_from_slice(&(self.num_bits as u32).to_le_bytes());
        out.extend_from_slice(&self.num_hashes.to_le_bytes());
        out.extend_from_slice(&self.inserted.to_le_bytes());
        out.extend_from_slice(&self.bits);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SketchError> {
        if bytes.len() < HEADER_LEN {
            return Err(SketchError::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[..4] != BLOOM_MAGIC {
            return Err(SketchError::Format("bad magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("four bytes"));
        let (b, k, inserted) = (word(4) as usize, word(8), word(12));
        let mut filter = Self::new(b, k).map_err(|e| SketchError::Format(e.to_string()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != filter.bits.len() {
            return Err(SketchError::Format(format!("expected {} bit-array bytes, got {}", filter.bits.len(), body.len())));
        }
        if b % 8 != 0 && body[body.len() - 1] >> (b % 8) != 0 {
            return Err(SketchError::Format("padding bits set".into()));
        }
        filter.bits.copy_from_slice(body);
        filter.inserted = inserted;
        Ok(filter)
    }
}

/// `(1 - e^{-kM/b})^k`.
pub fn bloom_fpr_estimate(num_bits: usize, num_hashes: u32, inserted: usize) -> f64 {
    let k = f64::from(num_hashes);
    (1.0 - (-k * inserted as f64 / num_bits as f64).exp()).powf(k)
}

/// Bit count and hash count minimizing size for `expected` elements at `target` FPR.
pub fn optimal_bloom_params(expected: usize, target: f64) -> Result<(usize, u32), SketchError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(SketchError::Parameter(format!("target rate {target} outside (0, 1)")));
    }
    let ln2 = std::f64::consts::LN_2;
    let m = expected.max(1) as f64;
    let b = (-m * target.ln() / (ln2 * ln2)).ceil().max(8.0) as usize;
    let k = ((b as f64 / m) * ln2).round().max(1.0) as u32;
    Ok((b, k))
}

/// Approximate intersection: client elements that the server's filter accepts.
pub fn bloom_psi(
    server_set: &[ElementDigest],
    client_set: &[ElementDigest],
    num_bits: usize,
    num_hashes: u32,
) -> Result<PsiResult, SketchError> {
    let mut filter = BloomFilter::new(num_bits, num_hashes)?;
    for x in server_set {
        filter.insert(x);
    }
    Ok(PsiResult::new(client_set.iter().filter(|y| filter.contains(y)).cloned().collect()))
}

/// Server side of the private variant: a filter over `H2(H(x)^d)` instead of
/// raw digests.
pub fn private_bloom_publish(
    keys: &RsaKeyPair,
    server_set: &[ElementDigest],
    num_bits: usize,
    num_hashes: u32,
    digest_len: usize,
) -> Result<BloomFilter, SketchError> {
    let public = keys.public();
    let mut filter = BloomFilter::new(num_bits, num_hashes)?;
    for x in server_set {
        filter.insert(&signature_digest(&keys.sign_raw(&element_value(x, &keys.n)), &public, digest_len));
    }
    Ok(filter)
}

/// Private Bloom-filter PSI run in memory: the server publishes a filter over
/// its signed elements, the client obtains signatures on its own elements
/// through blinding and queries the filter with them.
pub fn private_bloom_psi(
    keys: &RsaKeyPair,
    server_set: &[ElementDigest],
    client_set: &[ElementDigest],
    num_bits: usize,
    num_hashes: u32,
    digest_len: usize,
    rng: &mut dyn SecureRng,
) -> Result<PsiResult, ProtocolError> {
    let filter = private_bloom_publish(keys, server_set, num_bits, num_hashes, digest_len)
        .map_err(|e| ProtocolError::Config(e.to_string()))?;
    let public = keys.public();
    let mut matched = BTreeSet::new();
    for y in client_set {
        let value = element_value(y, &public.n);
        if value.is_zero() {
            return Err(ProtocolError::Violation("element hashes to zero modulo N".into()));
        }
        let (blinded, r) = public.blind(&value, rng)?;
        let signature = public.unblind(&keys.sign_raw(&blinded), &r)?;
        if filter.contains(&signature_digest(&signature, &public, digest_len)) {
            matched.insert(y.clone());
        }
    }
    Ok(PsiResult::new(matched))
}
