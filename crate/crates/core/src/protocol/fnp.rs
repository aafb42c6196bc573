//! Polynomial PSI over Paillier.
//!
//! 0. C -> S: encrypted coefficients of `P(t) = prod (t - y_j)`
//! 1. S -> C: `E(P(x) * r + x)` for every server element, shuffled
//!
//! For `x` in Y the polynomial vanishes and the client decrypts `x` itself;
//! otherwise `r` makes the plaintext uniform in Z_u.
//!
//! With `bins > 1` the client first hashes Y into bins and sends one
//! polynomial per bin, each padded with dummy roots to the fullest bin's
//! degree. The server evaluates each `x` only against its own bin, so the
//! work per element drops from |Y| to about the maximum bin load.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;

use super::{Direction, Party, PayloadKind, ProtocolError, PsiResult, SecureRng, TranscriptMessage};
use crate::crypto::{PaillierCiphertext, PaillierKeyPair, PaillierPublicKey, Polynomial};
use crate::encoding::ElementDigest;

/// Plaintexts stay this many bits below the modulus size.
pub const PLAINTEXT_MARGIN_BITS: u64 = 64;

/// Bytes of each digest used as its plaintext under modulus `u`.
pub fn plaintext_bytes(u: &BigUint, digest_len: usize) -> Result<usize, ProtocolError> {
    let usable = u.bits().saturating_sub(PLAINTEXT_MARGIN_BITS) / 8;
    if usable == 0 {
        return Err(ProtocolError::Config(format!(
            "Paillier modulus of {} bits leaves no room for plaintexts",
            u.bits()
        )));
    }
    Ok(digest_len.min(usable as usize))
}

/// Leading `bytes` of the digest as a big-endian integer.
pub fn element_plaintext(d: &ElementDigest, bytes: usize) -> BigUint {
    BigUint::from_bytes_be(&d.as_bytes()[..bytes.min(d.len())])
}

/// Bin of an element: its trailing eight digest bytes, big endian, mod `bins`.
pub fn bin_of(d: &ElementDigest, bins: usize) -> usize {
    let b = d.as_bytes();
    let tail = &b[b.len().saturating_sub(8)..];
    let v = tail.iter().fold(0u64, |acc, &x| (acc << 8) | u64::from(x));
    (v % bins as u64) as usize
}

/// Runs the scheme in memory with a single polynomial.
pub fn fnp_session(
    x: &[ElementDigest],
    y: &[ElementDigest],
    keys: Arc<PaillierKeyPair>,
    rng: &mut dyn SecureRng,
) -> Result<(Vec<TranscriptMessage>, PsiResult), ProtocolError> {
    let config = super::PsiConfig { paillier: Some(keys), ..Default::default() };
    super::run_psi(super::SchemeId::PaillierPolynomial, x, y, &config, rng)
}

pub(crate) struct FnpServer {
    public: PaillierPublicKey,
    bins: usize,
    set: Arc<Vec<ElementDigest>>,
    pt_bytes: usize,
    done: bool,
}

impl FnpServer {
    pub fn new(public: PaillierPublicKey, bins: usize, set: Arc<Vec<ElementDigest>>, digest_len: usize) -> Result<Self, ProtocolError> {
        if bins == 0 {
            return Err(ProtocolError::Config("bin count must be positive".into()));
        }
        let pt_bytes = plaintext_bytes(public.modulus(), digest_len)?;
        Ok(FnpServer { public, bins, set, pt_bytes, done: false })
    }
}

impl Party for FnpServer {
    fn receive(&mut self, msg: &TranscriptMessage, rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let coeffs = msg.expect_integers(PayloadKind::CiphertextList)?;
        if coeffs.is_empty() || coeffs.len() % self.bins != 0 {
            return Err(ProtocolError::Malformed(format!(
                "{} coefficients do not split into {} bins",
                coeffs.len(),
                self.bins
            )));
        }
        let u2 = self.public.modulus_squared();
        if coeffs.iter().any(|c| c.is_zero() || c >= u2) {
            return Err(ProtocolError::Malformed("ciphertext outside (0, u^2)".into()));
        }
        let coeffs: Vec<PaillierCiphertext> = coeffs.iter().cloned().map(PaillierCiphertext::from_value).collect();
        let stride = coeffs.len() / self.bins;
        let pk = &self.public;
        let mut out = Vec::with_capacity(self.set.len());
        for x in self.set.iter() {
            let bin = bin_of(x, self.bins);
            let value = element_plaintext(x, self.pt_bytes);
            let evaluated = pk.eval_polynomial(&coeffs[bin * stride..(bin + 1) * stride], &value)?;
            let r = rng.gen_biguint_range(&BigUint::one(), pk.modulus());
            let masked = pk.add(&pk.scalar_mul(&evaluated, &r), &pk.encrypt(&value, None, rng)?);
            out.push(masked.into_value());
        }
        out.shuffle(rng);
        self.done = true;
        Ok(vec![TranscriptMessage::integers(Direction::ServerToClient, msg.round + 1, PayloadKind::CiphertextList, out)])
    }

    fn is_finished(&self) -> bool {
        self.done
    }
}

pub(crate) struct FnpClient {
    keys: Arc<PaillierKeyPair>,
    bins: usize,
    expected_responses: Option<usize>,
    set: Vec<ElementDigest>,
    pt_bytes: usize,
    result: Option<PsiResult>,
}

impl FnpClient {
    pub fn new(
        keys: Arc<PaillierKeyPair>,
        bins: usize,
        expected_responses: Option<usize>,
        set: Vec<ElementDigest>,
        digest_len: usize,
    ) -> Result<Self, ProtocolError> {
        if bins == 0 {
            return Err(ProtocolError::Config("bin count must be positive".into()));
        }
        let pt_bytes = plaintext_bytes(keys.public.modulus(), digest_len)?;
        Ok(FnpClient { keys, bins, expected_responses, set, pt_bytes, result: None })
    }

    /// Per-bin root lists, padded with dummies that no digest can equal.
    fn bin_roots(&self, rng: &mut dyn SecureRng) -> Vec<Vec<BigUint>> {
        let mut bins: Vec<Vec<BigUint>> = vec![Vec::new(); self.bins];
        for y in &self.set {
            bins[bin_of(y, self.bins)].push(element_plaintext(y, self.pt_bytes));
        }
        let degree = bins.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let floor = BigUint::one() << (8 * self.pt_bytes);
        for roots in &mut bins {
            while roots.len() < degree {
                roots.push(rng.gen_biguint_range(&floor, self.keys.public.modulus()));
            }
        }
        bins
    }
}

impl Party for FnpClient {
    fn start(&mut self, rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        if self.set.is_empty() {
            self.result = Some(PsiResult::default());
            return Ok(Vec::new());
        }
        let pk = &self.keys.public;
        let mut encrypted = Vec::new();
        for roots in self.bin_roots(rng) {
            let poly = Polynomial::from_roots(&roots, pk.modulus());
            for c in poly.coefficients() {
                encrypted.push(pk.encrypt(c, None, rng)?.into_value());
            }
        }
        Ok(vec![TranscriptMessage::integers(Direction::ClientToServer, 0, PayloadKind::CiphertextList, encrypted)])
    }

    fn receive(&mut self, msg: &TranscriptMessage, _: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let responses = msg.expect_integers(PayloadKind::CiphertextList)?;
        if let Some(m) = self.expected_responses {
            if responses.len() != m {
                return Err(ProtocolError::Violation(format!("expected {m} responses, got {}", responses.len())));
            }
        }
        let lookup: HashMap<BigUint, &ElementDigest> =
            self.set.iter().map(|y| (element_plaintext(y, self.pt_bytes), y)).collect();
        let mut matched = BTreeSet::new();
        for c in responses {
            let plain = self
                .keys
                .decrypt(&PaillierCiphertext::from_value(c.clone()))
                .map_err(|e| ProtocolError::Malformed(format!("server response: {e}")))?;
            if let Some(y) = lookup.get(&plain) {
                matched.insert((*y).clone());
            }
        }
        self.result = Some(PsiResult::new(matched));
        Ok(Vec::new())
    }

    fn is_finished(&self) -> bool {
        self.result.is_some()
    }

    fn take_result(&mut self) -> Option<PsiResult> {
        self.result.take()
    }
}
