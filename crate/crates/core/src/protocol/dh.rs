//! DDH-based PSI. Both sides mask hashed elements with a secret exponent;
//! doubly-masked values match exactly when the elements match, because
//! `(h^a)^b = (h^b)^a`.
//!
//! 1. S -> C: `{H(x)^a}` shuffled
//! 2. C -> S: `[H(y)^b]` in client order
//! 3. S -> C: `[(H(y)^b)^a]` in the same order
//!
//! The client raises the first list to `b` and looks up each entry of the
//! third list, mapping hits back to its own elements by position.

use std::collections::HashSet;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::seq::SliceRandom;

use super::{
    Direction, Party, PayloadKind, ProtocolError, PsiResult, SecureRng, TranscriptMessage,
};
use crate::crypto::{hash_to_group, DhGroup};
use crate::encoding::ElementDigest;

fn sample_secret(group: &DhGroup, rng: &mut dyn SecureRng) -> BigUint {
    group.random_exponent(rng)
}

fn check_members(group: &DhGroup, values: &[BigUint]) -> Result<(), ProtocolError> {
    if values.iter().all(|v| group.is_member(v)) {
        Ok(())
    } else {
        Err(ProtocolError::NotInGroup)
    }
}

/// Runs the DH scheme in memory with fixed secrets.
pub fn dh_session(
    x: &[ElementDigest],
    y: &[ElementDigest],
    group: &DhGroup,
    a: &BigUint,
    b: &BigUint,
    rng: &mut dyn SecureRng,
) -> Result<(Vec<TranscriptMessage>, PsiResult), ProtocolError> {
    let mut server = super::PsiSession::server(
        super::ServerSetup::DiffieHellman { group: group.clone(), secret: Some(a.clone()) },
        Arc::new(super::dedup_in_order(x.to_vec())),
        32,
    )?;
    let mut client = super::PsiSession::client(
        super::ClientSetup::DiffieHellman { group: group.clone(), secret: Some(b.clone()) },
        y.to_vec(),
        32,
    )?;
    super::run_sessions(&mut server, &mut client, rng)
}

pub(crate) struct DhServer {
    group: DhGroup,
    secret: Option<BigUint>,
    set: Arc<Vec<ElementDigest>>,
    done: bool,
}

impl DhServer {
    pub fn new(group: DhGroup, secret: Option<BigUint>, set: Arc<Vec<ElementDigest>>) -> Self {
        DhServer { group, secret, set, done: false }
    }
}

impl Party for DhServer {
    fn start(&mut self, rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let a = match &self.secret {
            Some(a) => a.clone(),
            None => sample_secret(&self.group, rng),
        };
        let mut masked: Vec<BigUint> =
            self.set.iter().map(|x| self.group.exp(&hash_to_group(x, &self.group), &a)).collect();
        masked.shuffle(rng);
        self.secret = Some(a);
        Ok(vec![TranscriptMessage::integers(Direction::ServerToClient, 0, PayloadKind::GroupElementList, masked)])
    }

    fn receive(&mut self, msg: &TranscriptMessage, _: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let client_masked = msg.expect_integers(PayloadKind::GroupElementList)?;
        check_members(&self.group, client_masked)?;
        let a = self.secret.as_ref().expect("secret fixed at start");
        let doubly: Vec<BigUint> = client_masked.iter().map(|v| self.group.exp(v, a)).collect();
        self.done = true;
        Ok(vec![TranscriptMessage::integers(Direction::ServerToClient, msg.round + 1, PayloadKind::GroupElementList, doubly)])
    }

    fn is_finished(&self) -> bool {
        self.done
    }
}

pub(crate) struct DhClient {
    group: DhGroup,
    secret: Option<BigUint>,
    set: Vec<ElementDigest>,
    server_masked: Option<Vec<BigUint>>,
    result: Option<PsiResult>,
}

impl DhClient {
    pub fn new(group: DhGroup, secret: Option<BigUint>, set: Vec<ElementDigest>) -> Self {
        DhClient { group, secret, set, server_masked: None, result: None }
    }
}

impl Party for DhClient {
    fn receive(&mut self, msg: &TranscriptMessage, rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        let values = msg.expect_integers(PayloadKind::GroupElementList)?;
        check_members(&self.group, values)?;
        match self.server_masked.take() {
            None => {
                let b = match &self.secret {
                    Some(b) => b.clone(),
                    None => sample_secret(&self.group, rng),
                };
                let masked: Vec<BigUint> =
                    self.set.iter().map(|y| self.group.exp(&hash_to_group(y, &self.group), &b)).collect();
                self.secret = Some(b);
                self.server_masked = Some(values.to_vec());
                Ok(vec![TranscriptMessage::integers(Direction::ClientToServer, msg.round + 1, PayloadKind::GroupElementList, masked)])
            }
            Some(server_masked) => {
                if values.len() != self.set.len() {
                    return Err(ProtocolError::Violation(format!(
                        "expected {} doubly-masked values, got {}",
                        self.set.len(),
                        values.len()
                    )));
                }
                let b = self.secret.as_ref().expect("secret fixed in round 1");
                let server_doubly: HashSet<BigUint> = server_masked.iter().map(|v| self.group.exp(v, b)).collect();
                let matched = self
                    .set
                    .iter()
                    .zip(values)
                    .filter(|(_, v)| server_doubly.contains(*v))
                    .map(|(y, _)| y.clone())
                    .collect();
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

#[cfg(test)]
mod tests {
    use super::super::testutil::random_sets;
    use super::super::{plaintext_intersection, run_psi, PsiConfig, SchemeId};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn toy_group_single_match() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let group = DhGroup::from_safe_prime(BigUint::from(23u8)).unwrap();
        let e = ElementDigest::from_bytes(vec![5]);
        let (t, r) = dh_session(std::slice::from_ref(&e), std::slice::from_ref(&e), &group, &BigUint::from(3u8), &BigUint::from(7u8), &mut rng)
            .unwrap();
        assert_eq!(r.match_count, 1);
        // H(e) = 2; server sends 2^3 = 8; client sends 2^7 mod 23 = 13; reply 13^3 mod 23 = 12
        let ints = |i: usize| t[i].expect_integers(PayloadKind::GroupElementList).unwrap().to_vec();
        assert_eq!(ints(0), vec![BigUint::from(8u8)]);
        assert_eq!(ints(1), vec![BigUint::from(13u8)]);
        assert_eq!(ints(2), vec![BigUint::from(12u8)]);
    }

    #[test]
    fn rejects_non_members() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let group = DhGroup::from_safe_prime(BigUint::from(23u8)).unwrap();
        let mut server = DhServer::new(group, None, Arc::new(vec![ElementDigest::from_bytes(vec![1])]));
        server.start(&mut rng).unwrap();
        // 5 is a non-residue mod 23
        let bad = TranscriptMessage::integers(Direction::ClientToServer, 1, PayloadKind::GroupElementList, vec![BigUint::from(5u8)]);
        assert!(matches!(server.receive(&bad, &mut rng), Err(ProtocolError::NotInGroup)));
    }

    #[test]
    fn oracle_equivalence_and_order() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let group = DhGroup::generate(128, &mut rng).unwrap();
        let cfg = PsiConfig { group: Some(group.clone()), ..Default::default() };
        for _ in 0..20 {
            let (x, y) = random_sets(&mut rng, 64, 16);
            let (t, r) = run_psi(SchemeId::DiffieHellman, &x, &y, &cfg, &mut rng).unwrap();
            assert_eq!(r, plaintext_intersection(&x, &y));
            assert_eq!(t.len(), 3);
            assert_eq!(t[1].direction, Direction::ClientToServer);
            assert!(t.iter().all(|m| m.kind == PayloadKind::GroupElementList));
        }
    }

    #[test]
    fn duplicate_client_elements_are_merged() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let group = DhGroup::generate(64, &mut rng).unwrap();
        let (x, mut y) = random_sets(&mut rng, 8, 4);
        y.push(y[0].clone());
        let cfg = PsiConfig { group: Some(group), ..Default::default() };
        let (t, r) = run_psi(SchemeId::DiffieHellman, &x, &y, &cfg, &mut rng).unwrap();
        assert_eq!(t[1].entry_count(), 4);
        assert_eq!(r, plaintext_intersection(&x, &y));
    }
}
