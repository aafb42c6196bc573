//! Protocol messages and their byte encoding.
//!
//! ```text
//! kind: u8 | round: u8 | count: u32 BE | entries
//! ```
//!
//! Digest-valued kinds (`DigestList`, `ResultList`) store entries as fixed
//! width digests; every other kind stores `len: u32 BE | magnitude BE`.

use num_bigint::BigUint;

use super::ProtocolError;
use crate::encoding::ElementDigest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PayloadKind {
    DigestList = 0x01,
    GroupElementList = 0x02,
    BlindedList = 0x03,
    SignedList = 0x04,
    CiphertextList = 0x05,
    ResultList = 0x06,
}

impl PayloadKind {
    pub fn from_tag(tag: u8) -> Option<Self> {
        use PayloadKind::*;
        [DigestList, GroupElementList, BlindedList, SignedList, CiphertextList, ResultList]
            .into_iter()
            .find(|k| *k as u8 == tag)
    }

    pub fn carries_digests(self) -> bool {
        matches!(self, PayloadKind::DigestList | PayloadKind::ResultList)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Digests(Vec<ElementDigest>),
    Integers(Vec<BigUint>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::Digests(d) => d.len(),
            Payload::Integers(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptMessage {
    pub direction: Direction,
    pub round: u8,
    pub kind: PayloadKind,
    pub payload: Payload,
}

impl TranscriptMessage {
    pub fn digests(direction: Direction, round: u8, kind: PayloadKind, entries: Vec<ElementDigest>) -> Self {
        debug_assert!(kind.carries_digests());
        TranscriptMessage { direction, round, kind, payload: Payload::Digests(entries) }
    }

    pub fn integers(direction: Direction, round: u8, kind: PayloadKind, entries: Vec<BigUint>) -> Self {
        debug_assert!(!kind.carries_digests());
        TranscriptMessage { direction, round, kind, payload: Payload::Integers(entries) }
    }

    pub fn entry_count(&self) -> usize {
        self.payload.len()
    }

    pub fn expect_digests(&self, kind: PayloadKind) -> Result<&[ElementDigest], ProtocolError> {
        match (&self.payload, self.kind == kind) {
            (Payload::Digests(d), true) => Ok(d),
            _ => Err(ProtocolError::UnexpectedMessage { expected: kind, got: self.kind }),
        }
    }

    pub fn expect_integers(&self, kind: PayloadKind) -> Result<&[BigUint], ProtocolError> {
        match (&self.payload, self.kind == kind) {
            (Payload::Integers(v), true) => Ok(v),
            _ => Err(ProtocolError::UnexpectedMessage { expected: kind, got: self.kind }),
        }
    }

    /// Payload size in bits as it appears on the wire, header excluded.
    pub fn payload_bits(&self) -> u64 {
        8 * (self.encode().len() as u64 - 6)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 36 * self.entry_count());
        out.push(self.kind as u8);
        out.push(self.round);
        out.extend_from_slice(&(self.entry_count() as u32).to_be_bytes());
        match &self.payload {
            Payload::Digests(ds) => ds.iter().for_each(|d| out.extend_from_slice(d.as_bytes())),
            Payload::Integers(vs) => {
                for v in vs {
                    let bytes = if v == &BigUint::default() { vec![] } else { v.to_bytes_be() };
                    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
                    out.extend_from_slice(&bytes);
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], direction: Direction, digest_len: usize) -> Result<Self, ProtocolError> {
        let mut r = Reader(bytes);
        let tag = r.u8()?;
        let kind = PayloadKind::from_tag(tag)
            .ok_or_else(|| ProtocolError::Malformed(format!("unknown payload kind 0x{tag:02x}")))?;
        let round = r.u8()?;
        let count = r.u32()? as usize;
        let payload = if kind.carries_digests() {
            if digest_len == 0 {
                return Err(ProtocolError::Malformed("zero digest width".into()));
            }
            if r.0.len() != count.saturating_mul(digest_len) {
                return Err(ProtocolError::Malformed(format!(
                    "{count} digests of {digest_len} bytes need {} bytes, have {}",
                    count.saturating_mul(digest_len),
                    r.0.len()
                )));
            }
            Payload::Digests(r.0.chunks(digest_len).map(ElementDigest::from_bytes).collect())
        } else {
            // Each entry needs at least its 4-byte length.
            if count > r.0.len() / 4 {
                return Err(ProtocolError::Malformed(format!("entry count {count} exceeds payload")));
            }
            let mut vs = Vec::with_capacity(count);
            for _ in 0..count {
                let len = r.u32()? as usize;
                vs.push(BigUint::from_bytes_be(r.take(len)?));
            }
            if !r.0.is_empty() {
                return Err(ProtocolError::Malformed(format!("{} trailing bytes", r.0.len())));
            }
            Payload::Integers(vs)
        };
        Ok(TranscriptMessage { direction, round, kind, payload })
    }
}

pub(crate) struct Reader<'a>(pub &'a [u8]);

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        if self.0.len() < n {
            return Err(ProtocolError::Malformed(format!("truncated: need {n} bytes, have {}", self.0.len())));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
}
