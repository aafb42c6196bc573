//! Blind-RSA PSI.
//!
//! 0. S -> C (offline): `{H2(H(x)^d mod N)}` shuffled
//! 1. C -> S: `[H(y) * r^e mod N]` with a fresh `r` per element
//! 2. S -> C: `[b^d mod N]` in the same order
//!
//! The client strips `r`, leaving `H(y)^d`, and compares `H2` of that with
//! the published list. `H2` is the digest with a 0x02 domain tag.

use std::collections::HashSet;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::seq::SliceRandom;

use super::{
    Direction, Party, PayloadKind, ProtocolError, PsiResult, SecureRng, TranscriptMessage,
};
use crate::crypto::{RsaKeyPair, RsaPublicKey};
use crate::encoding::{hash_truncated, ElementDigest};

pub const SIGNATURE_DOMAIN_TAG: u8 = 0x02;

/// Digest of an element viewed as an integer modulo N.
pub fn element_value(d: &ElementDigest, n: &BigUint) -> BigUint {
    BigUint::from_bytes_be(d.as_bytes()) % n
}

/// `H2(s)`: tagged digest of the fixed-width big-endian signature.
pub fn signature_digest(signature: &BigUint, public: &RsaPublicKey, digest_len: usize) -> ElementDigest {
    let width = public.byte_len();
    let bytes = signature.to_bytes_be();
    let mut fixed = vec![0u8; width.saturating_sub(bytes.len())];
    fixed.extend_from_slice(&bytes);
    hash_truncated(&[&[SIGNATURE_DOMAIN_TAG], &fixed], digest_len)
}

/// The server's offline list, shuffled. Computable once per server set.
pub fn publish(
    keys: &RsaKeyPair,
    x: &[ElementDigest],
    digest_len: usize,
    rng: &mut dyn SecureRng,
) -> Vec<ElementDigest> {
    let public = keys.public();
    let mut out: Vec<ElementDigest> = x
        .iter()
        .map(|d| signature_digest(&keys.sign_raw(&element_value(d, &keys.n)), &public, digest_len))
        .collect();
    out.shuffle(rng);
    out
}

/// Runs the scheme in memory.
pub fn brsa_session(
    x: &[ElementDigest],
    y: &[ElementDigest],
    keys: Arc<RsaKeyPair>,
    rng: &mut dyn SecureRng,
) -> Result<(Vec<TranscriptMessage>, PsiResult), ProtocolError> {
    let config = super::PsiConfig { rsa: Some(keys), ..Default::default() };
    super::run_psi(super::SchemeId::BlindRsa, x, y, &config, rng)
}

pub(crate) struct BlindRsaServer {
    keys: Arc<RsaKeyPair>,
    published: Option<Arc<Vec<ElementDigest>>>,
    set: Arc<Vec<ElementDigest>>,
    digest_len: usize,
    done: bool,
}

impl BlindRsaServer {
    pub fn new(
        keys: Arc<RsaKeyPair>,
        published: Option<Arc<Vec<ElementDigest>>>,
        set: Arc<Vec<ElementDigest>>,
        digest_len: usize,
    ) -> Self {
        BlindRsaServer { keys, published, set, digest_len, done: false }
    }
}

impl Party for BlindRsaServer {
    fn start(&mut self, rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let list = match &self.published {
            Some(p) => p.as_ref().clone(),
            None => publish(&self.keys, &self.set, self.digest_len, rng),
        };
        Ok(vec![TranscriptMessage::digests(Direction::ServerToClient, 0, PayloadKind::DigestList, list)])
    }

    fn receive(&mut self, msg: &TranscriptMessage, _: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let blinded = msg.expect_integers(PayloadKind::BlindedList)?;
        if blinded.iter().any(|b| b.is_zero() || *b >= self.keys.n) {
            return Err(ProtocolError::Violation("blinded value outside (0, N)".into()));
        }
        let signed = blinded.iter().map(|b| self.keys.sign_raw(b)).collect();
        self.done = true;
        Ok(vec![TranscriptMessage::integers(Direction::ServerToClient, msg.round + 1, PayloadKind::SignedList, signed)])
    }

    fn is_finished(&self) -> bool {
        self.done
    }
}

pub(crate) struct BlindRsaClient {
    public: RsaPublicKey,
    set: Vec<ElementDigest>,
    digest_len: usize,
    published: Option<HashSet<ElementDigest>>,
    blinding: Vec<BigUint>,
    result: Option<PsiResult>,
}

impl BlindRsaClient {
    pub fn new(public: RsaPublicKey, set: Vec<ElementDigest>, digest_len: usize) -> Self {
        BlindRsaClient { public, set, digest_len, published: None, blinding: Vec::new(), result: None }
    }
}

impl Party for BlindRsaClient {
    fn receive(&mut self, msg: &TranscriptMessage, rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        match self.published.take() {
            None => {
                let list = msg.expect_digests(PayloadKind::DigestList)?;
                self.published = Some(list.iter().cloned().collect());
                let mut blinded = Vec::with_capacity(self.set.len());
                for y in &self.set {
                    let value = element_value(y, &self.public.n);
                    if value.is_zero() {
                        return Err(ProtocolError::Violation("element hashes to zero modulo N".into()));
                    }
                    let (b, r) = self.public.blind(&value, rng)?;
                    blinded.push(b);
                    self.blinding.push(r);
                }
                Ok(vec![TranscriptMessage::integers(Direction::ClientToServer, msg.round + 1, PayloadKind::BlindedList, blinded)])
            }
            Some(published) => {
                let signed = msg.expect_integers(PayloadKind::SignedList)?;
                if signed.len() != self.set.len() {
                    return Err(ProtocolError::Violation(format!(
                        "expected {} signatures, got {}",
                        self.set.len(),
                        signed.len()
                    )));
                }
                let mut matched = std::collections::BTreeSet::new();
                for ((y, s), r) in self.set.iter().zip(signed).zip(&self.blinding) {
                    let sig = self.public.unblind(s, r)?;
                    if published.contains(&signature_digest(&sig, &self.public, self.digest_len)) {
                        matched.insert(y.clone());
                    }
                }
                self.result = Some(PsiResult::new(matched));
                Ok(Vec::new())
            }
        }
    }

    fn is_finished(&self) -> bool {
        self.result.is_some()
    }

    fn take_result(&mut self) -> Option<PsiResult> {
        self.result.take()
    }
}
