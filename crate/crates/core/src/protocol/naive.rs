//! Hash-based schemes: the server publishes its digests (pull) or the client
//! uploads its digests (push). Neither hides anything beyond the hash.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;

use super::{
    Direction, Party, PayloadKind, ProtocolError, PsiResult, SecureRng, TranscriptMessage,
};
use crate::encoding::ElementDigest;

/// The server's published digest list, shuffled.
pub fn publish(x: &[ElementDigest], rng: &mut dyn SecureRng) -> TranscriptMessage {
    let mut entries = x.to_vec();
    entries.shuffle(rng);
    TranscriptMessage::digests(Direction::ServerToClient, 0, PayloadKind::DigestList, entries)
}

/// Client-side intersection of a published digest list with `y`.
pub fn pull_intersect(msg: &TranscriptMessage, y: &[ElementDigest]) -> Result<PsiResult, ProtocolError> {
    let published: HashSet<&ElementDigest> = msg.expect_digests(PayloadKind::DigestList)?.iter().collect();
    Ok(PsiResult::new(y.iter().filter(|d| published.contains(d)).cloned().collect()))
}

/// Runs the push exchange in memory. Returns what the server saw of the
/// client, the result message and the client's result.
pub fn push_exchange(
    x: &[ElementDigest],
    y: &[ElementDigest],
    rng: &mut dyn SecureRng,
) -> Result<(BTreeSet<ElementDigest>, TranscriptMessage, PsiResult), ProtocolError> {
    let mut server = super::PsiSession::server(super::ServerSetup::NaivePush, Arc::new(x.to_vec()), digest_len(x, y))?;
    let mut client = super::PsiSession::client(super::ClientSetup::NaivePush, y.to_vec(), digest_len(x, y))?;
    let (transcript, result) = super::run_sessions(&mut server, &mut client, rng)?;
    let server_view = transcript[0].expect_digests(PayloadKind::DigestList)?.iter().cloned().collect();
    Ok((server_view, transcript[1].clone(), result))
}

fn digest_len(x: &[ElementDigest], y: &[ElementDigest]) -> usize {
    x.first().or(y.first()).map_or(32, ElementDigest::len)
}

pub(crate) struct PullServer {
    set: Arc<Vec<ElementDigest>>,
    sent: bool,
}

impl PullServer {
    pub fn new(set: Arc<Vec<ElementDigest>>) -> Self {
        PullServer { set, sent: false }
    }
}

impl Party for PullServer {
    fn start(&mut self, rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        self.sent = true;
        Ok(vec![publish(&self.set, rng)])
    }

    fn receive(&mut self, _: &TranscriptMessage, _: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        Err(ProtocolError::Violation("pull server accepts no client messages".into()))
    }

    fn is_finished(&self) -> bool {
        self.sent
    }
}

pub(crate) struct PullClient {
    set: Vec<ElementDigest>,
    digest_len: usize,
    result: Option<PsiResult>,
}

impl PullClient {
    pub fn new(set: Vec<ElementDigest>, digest_len: usize) -> Self {
        PullClient { set, digest_len, result: None }
    }
}

impl Party for PullClient {
    fn receive(&mut self, msg: &TranscriptMessage, _: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let entries = msg.expect_digests(PayloadKind::DigestList)?;
        if entries.iter().any(|d| d.len() != self.digest_len) {
            return Err(ProtocolError::Malformed("digest width mismatch".into()));
        }
        self.result = Some(pull_intersect(msg, &self.set)?);
        Ok(Vec::new())
    }

    fn is_finished(&self) -> bool {
        self.result.is_some()
    }

    fn take_result(&mut self) -> Option<PsiResult> {
        self.result.take()
    }
}

pub(crate) struct PushServer {
    set: Arc<Vec<ElementDigest>>,
    done: bool,
}

impl PushServer {
    pub fn new(set: Arc<Vec<ElementDigest>>) -> Self {
        PushServer { set, done: false }
    }
}

impl Party for PushServer {
    fn receive(&mut self, msg: &TranscriptMessage, _: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let uploaded = msg.expect_digests(PayloadKind::DigestList)?;
        let own: HashSet<&ElementDigest> = self.set.iter().collect();
        let matched: Vec<ElementDigest> = uploaded.iter().filter(|d| own.contains(d)).cloned().collect();
        self.done = true;
        Ok(vec![TranscriptMessage::digests(Direction::ServerToClient, msg.round + 1, PayloadKind::ResultList, matched)])
    }

    fn is_finished(&self) -> bool {
        self.done
    }
}

pub(crate) struct PushClient {
    set: Vec<ElementDigest>,
    result: Option<PsiResult>,
}

impl PushClient {
    pub fn new(set: Vec<ElementDigest>) -> Self {
        PushClient { set, result: None }
    }
}

impl Party for PushClient {
    fn start(&mut self, _: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        Ok(vec![TranscriptMessage::digests(Direction::ClientToServer, 0, PayloadKind::DigestList, self.set.clone())])
    }

    fn receive(&mut self, msg: &TranscriptMessage, _: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let returned = msg.expect_digests(PayloadKind::ResultList)?;
        let own: HashSet<&ElementDigest> = self.set.iter().collect();
        if let Some(stray) = returned.iter().find(|d| !own.contains(d)) {
            return Err(ProtocolError::Violation(format!("server returned foreign element {stray:?}")));
        }
        self.result = Some(PsiResult::new(returned.iter().cloned().collect()));
        Ok(Vec::new())
    }

    fn is_finished(&self) -> bool {
        self.result.is_some()
    }

    fn take_result(&mut self) -> Option<PsiResult> {
        self.result.take()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::random_sets;
    use super::super::{plaintext_intersection, run_psi, PsiConfig, SchemeId};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn d(b: u8) -> ElementDigest {
        ElementDigest::from_bytes(vec![b; 32])
    }

    #[test]
    fn published_list_size() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let msg = publish(&[d(1), d(2), d(3)], &mut rng);
        assert_eq!(msg.entry_count(), 3);
        assert_eq!(msg.encode().len() - 6, 3 * 32);
        assert_eq!(TranscriptMessage::decode(&msg.encode(), Direction::ServerToClient, 32).unwrap(), msg);
    }

    #[test]
    fn pull_small_sets() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let msg = publish(&[d(1), d(2), d(3)], &mut rng);
        let r = pull_intersect(&msg, &[d(2), d(3), d(4)]).unwrap();
        assert_eq!(r.matched, [d(2), d(3)].into_iter().collect());
        assert_eq!(pull_intersect(&msg, &[d(9)]).unwrap().match_count, 0);
        let wrong = TranscriptMessage::digests(Direction::ServerToClient, 0, PayloadKind::ResultList, vec![]);
        assert!(pull_intersect(&wrong, &[d(1)]).is_err());
    }

    #[test]
    fn push_small_sets() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let (view, msg, result) = push_exchange(&[d(1), d(2)], &[d(2)], &mut rng).unwrap();
        assert_eq!(view, [d(2)].into_iter().collect());
        assert_eq!(result.matched, [d(2)].into_iter().collect());
        assert_eq!(msg.kind, PayloadKind::ResultList);
        assert_eq!(msg.payload_bits(), 256);
    }

    #[test]
    fn oracle_equivalence() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let cfg = PsiConfig::default();
        for _ in 0..100 {
            let (x, y) = random_sets(&mut rng, 256, 64);
            let oracle = plaintext_intersection(&x, &y);
            for scheme in [SchemeId::NaivePull, SchemeId::NaivePush] {
                let (transcript, result) = run_psi(scheme, &x, &y, &cfg, &mut rng).unwrap();
                assert_eq!(result, oracle);
                assert_eq!(transcript.len(), scheme.message_count());
            }
        }
    }

    #[test]
    fn pull_client_never_sends() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (x, y) = random_sets(&mut rng, 20, 10);
        let (t, _) = run_psi(SchemeId::NaivePull, &x, &y, &PsiConfig::default(), &mut rng).unwrap();
        assert!(t.iter().all(|m| m.direction == Direction::ServerToClient));
    }
}
