//! Two-party PSI sessions.
//!
//! Each scheme is a pair of state machines (server side, client side) that
//! exchange [`TranscriptMessage`]s. A [`PsiSession`] wraps one side and
//! enforces round ordering and single delivery of the result. Sessions know
//! nothing about transport: [`run_sessions`] drives both sides in memory and
//! the `net` module drives them over TCP.

pub mod blind_rsa;
pub mod dh;
pub mod fnp;
pub mod naive;
pub mod transcript;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{CryptoError, DhGroup, PaillierKeyPair, PaillierPublicKey, RsaKeyPair, RsaPublicKey};
use crate::encoding::ElementDigest;
pub use transcript::{Direction, Payload, PayloadKind, TranscriptMessage};

/// Object-safe CSPRNG bound used by session state machines.
pub trait SecureRng: RngCore + CryptoRng {}
impl<T: RngCore + CryptoRng + ?Sized> SecureRng for T {}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("expected {expected:?}, got {got:?}")]
    UnexpectedMessage { expected: PayloadKind, got: PayloadKind },
    #[error("out-of-order message: round {got} after round {last}")]
    OutOfOrder { last: u8, got: u8 },
    #[error("value is not in the expected group")]
    NotInGroup,
    #[error("{0}")]
    Violation(String),
    #[error("session already finished")]
    Finished,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    NaivePull,
    NaivePush,
    DiffieHellman,
    BlindRsa,
    PaillierPolynomial,
}

/// Client/server deployment model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    Pull,
    Push,
    Hybrid,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::NaivePull,
        SchemeId::NaivePush,
        SchemeId::DiffieHellman,
        SchemeId::BlindRsa,
        SchemeId::PaillierPolynomial,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::NaivePull => "naive-pull",
            SchemeId::NaivePush => "naive-push",
            SchemeId::DiffieHellman => "dh",
            SchemeId::BlindRsa => "blind-rsa",
            SchemeId::PaillierPolynomial => "paillier",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn model(self) -> Model {
        match self {
            SchemeId::NaivePull => Model::Pull,
            SchemeId::NaivePush => Model::Push,
            _ => Model::Hybrid,
        }
    }

    /// Messages exchanged in a run with nonempty inputs.
    pub fn message_count(self) -> usize {
        match self {
            SchemeId::NaivePull => 1,
            SchemeId::NaivePush | SchemeId::PaillierPolynomial => 2,
            SchemeId::DiffieHellman | SchemeId::BlindRsa => 3,
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Server,
    Client,
}

/// Client-side elements found in the server set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PsiResult {
    pub matched: BTreeSet<ElementDigest>,
    pub match_count: usize,
}

impl PsiResult {
    pub fn new(matched: BTreeSet<ElementDigest>) -> Self {
        let match_count = matched.len();
        PsiResult { matched, match_count }
    }
}

/// Plaintext intersection, the reference every scheme is checked against.
pub fn plaintext_intersection(server: &[ElementDigest], client: &[ElementDigest]) -> PsiResult {
    let server: HashSet<&ElementDigest> = server.iter().collect();
    PsiResult::new(client.iter().filter(|y| server.contains(y)).cloned().collect())
}

/// Key material for the server side of a session.
#[derive(Clone, Debug)]
pub enum ServerSetup {
    NaivePull,
    NaivePush,
    DiffieHellman { group: DhGroup, secret: Option<BigUint> },
    /// `published` holds the offline signature digests when precomputed.
    BlindRsa { keys: Arc<RsaKeyPair>, published: Option<Arc<Vec<ElementDigest>>> },
    PaillierPolynomial { public: PaillierPublicKey, bins: usize },
}

/// Key material for the client side of a session.
#[derive(Clone, Debug)]
pub enum ClientSetup {
    NaivePull,
    NaivePush,
    DiffieHellman { group: DhGroup, secret: Option<BigUint> },
    BlindRsa { public: RsaPublicKey },
    /// `expected_responses` is the server set size, when known.
    PaillierPolynomial { keys: Arc<PaillierKeyPair>, bins: usize, expected_responses: Option<usize> },
}

impl ServerSetup {
    pub fn scheme(&self) -> SchemeId {
        match self {
            ServerSetup::NaivePull => SchemeId::NaivePull,
            ServerSetup::NaivePush => SchemeId::NaivePush,
            ServerSetup::DiffieHellman { .. } => SchemeId::DiffieHellman,
            ServerSetup::BlindRsa { .. } => SchemeId::BlindRsa,
            ServerSetup::PaillierPolynomial { .. } => SchemeId::PaillierPolynomial,
        }
    }
}

impl ClientSetup {
    pub fn scheme(&self) -> SchemeId {
        match self {
            ClientSetup::NaivePull => SchemeId::NaivePull,
            ClientSetup::NaivePush => SchemeId::NaivePush,
            ClientSetup::DiffieHellman { .. } => SchemeId::DiffieHellman,
            ClientSetup::BlindRsa { .. } => SchemeId::BlindRsa,
            ClientSetup::PaillierPolynomial { .. } => SchemeId::PaillierPolynomial,
        }
    }
}

/// One side's scheme-specific state machine.
pub(crate) trait Party: Send {
    fn start(&mut self, _rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        Ok(Vec::new())
    }

    fn receive(
        &mut self,
        msg: &TranscriptMessage,
        rng: &mut dyn SecureRng,
    ) -> Result<Vec<TranscriptMessage>, ProtocolError>;

    fn is_finished(&self) -> bool;

    fn take_result(&mut self) -> Option<PsiResult> {
        None
    }
}

pub struct PsiSession {
    scheme: SchemeId,
    role: Role,
    round: u32,
    last_round_seen: Option<u8>,
    state: Box<dyn Party>,
    result_delivered: bool,
}

impl fmt::Debug for PsiSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PsiSession")
            .field("scheme", &self.scheme)
            .field("role", &self.role)
            .field("round", &self.round)
            .finish()
    }
}

impl PsiSession {
    /// Server side over `set`, whose elements must be distinct.
    pub fn server(setup: ServerSetup, set: Arc<Vec<ElementDigest>>, digest_len: usize) -> Result<Self, ProtocolError> {
        let scheme = setup.scheme();
        let state: Box<dyn Party> = match setup {
            ServerSetup::NaivePull => Box::new(naive::PullServer::new(set)),
            ServerSetup::NaivePush => Box::new(naive::PushServer::new(set)),
            ServerSetup::DiffieHellman { group, secret } => Box::new(dh::DhServer::new(group, secret, set)),
            ServerSetup::BlindRsa { keys, published } => {
                Box::new(blind_rsa::BlindRsaServer::new(keys, published, set, digest_len))
            }
            ServerSetup::PaillierPolynomial { public, bins } => {
                Box::new(fnp::FnpServer::new(public, bins, set, digest_len)?)
            }
        };
        Ok(Self::wrap(scheme, Role::Server, state))
    }

    /// Client side over `set`; duplicates are dropped, first occurrence kept.
    pub fn client(setup: ClientSetup, set: Vec<ElementDigest>, digest_len: usize) -> Result<Self, ProtocolError> {
        let scheme = setup.scheme();
        let set = dedup_in_order(set);
        let state: Box<dyn Party> = match setup {
            ClientSetup::NaivePull => Box::new(naive::PullClient::new(set, digest_len)),
            ClientSetup::NaivePush => Box::new(naive::PushClient::new(set)),
            ClientSetup::DiffieHellman { group, secret } => Box::new(dh::DhClient::new(group, secret, set)),
            ClientSetup::BlindRsa { public } => Box::new(blind_rsa::BlindRsaClient::new(public, set, digest_len)),
            ClientSetup::PaillierPolynomial { keys, bins, expected_responses } => {
                Box::new(fnp::FnpClient::new(keys, bins, expected_responses, set, digest_len)?)
            }
        };
        Ok(Self::wrap(scheme, Role::Client, state))
    }

    fn wrap(scheme: SchemeId, role: Role, state: Box<dyn Party>) -> Self {
        PsiSession { scheme, role, round: 0, last_round_seen: None, state, result_delivered: false }
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Number of steps taken so far.
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn start(&mut self, rng: &mut dyn SecureRng) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        if self.round != 0 {
            return Err(ProtocolError::Violation("session already started".into()));
        }
        self.round += 1;
        self.state.start(rng)
    }

    pub fn receive(
        &mut self,
        msg: &TranscriptMessage,
        rng: &mut dyn SecureRng,
    ) -> Result<Vec<TranscriptMessage>, ProtocolError> {
        if self.round == 0 {
            return Err(ProtocolError::Violation("session not started".into()));
        }
        if self.state.is_finished() {
            return Err(ProtocolError::Finished);
        }
        let incoming = match self.role {
            Role::Server => Direction::ClientToServer,
            Role::Client => Direction::ServerToClient,
        };
        if msg.direction != incoming {
            return Err(ProtocolError::Violation(format!("{:?} received a {:?} message", self.role, msg.direction)));
        }
        if let Some(last) = self.last_round_seen {
            if msg.round < last {
                return Err(ProtocolError::OutOfOrder { last, got: msg.round });
            }
        }
        self.last_round_seen = Some(msg.round);
        self.round += 1;
        self.state.receive(msg, rng)
    }

    pub fn is_finished(&self) -> bool {
        self.result_delivered || self.state.is_finished()
    }

    /// The client's result, available once and only once after finishing.
    pub fn take_result(&mut self) -> Option<PsiResult> {
        if self.result_delivered || !self.state.is_finished() {
            return None;
        }
        let result = self.state.take_result();
        self.result_delivered = result.is_some();
        result
    }
}

pub(crate) fn dedup_in_order(set: Vec<ElementDigest>) -> Vec<ElementDigest> {
    let mut seen = HashSet::with_capacity(set.len());
    set.into_iter().filter(|d| seen.insert(d.clone())).collect()
}

/// Drives both sides in memory, returning the full transcript and the
/// client's result.
pub fn run_sessions(
    server: &mut PsiSession,
    client: &mut PsiSession,
    rng: &mut dyn SecureRng,
) -> Result<(Vec<TranscriptMessage>, PsiResult), ProtocolError> {
    let mut queue: VecDeque<TranscriptMessage> = server.start(rng)?.into();
    queue.extend(client.start(rng)?);
    let mut transcript = Vec::new();
    while let Some(msg) = queue.pop_front() {
        let replies = match msg.direction {
            Direction::ServerToClient => client.receive(&msg, rng)?,
            Direction::ClientToServer => server.receive(&msg, rng)?,
        };
        transcript.push(msg);
        queue.extend(replies);
    }
    let result = client
        .take_result()
        .ok_or_else(|| ProtocolError::Violation("client finished without a result".into()))?;
    Ok((transcript, result))
}

/// Key material for [`run_psi`]. Only what the chosen scheme needs must be set.
#[derive(Clone, Debug)]
pub struct PsiConfig {
    pub digest_len: usize,
    pub group: Option<DhGroup>,
    pub rsa: Option<Arc<RsaKeyPair>>,
    pub paillier: Option<Arc<PaillierKeyPair>>,
    /// Bins for the polynomial scheme; 1 is a single polynomial over all of Y.
    pub fnp_bins: usize,
}

impl Default for PsiConfig {
    fn default() -> Self {
        PsiConfig { digest_len: 32, group: None, rsa: None, paillier: None, fnp_bins: 1 }
    }
}

fn missing(what: &str, scheme: SchemeId) -> ProtocolError {
    ProtocolError::Config(format!("{scheme} needs {what}"))
}

/// Builds the two setups for `scheme` from `config`.
pub fn setups_for(scheme: SchemeId, config: &PsiConfig, server_size: usize) -> Result<(ServerSetup, ClientSetup), ProtocolError> {
    Ok(match scheme {
        SchemeId::NaivePull => (ServerSetup::NaivePull, ClientSetup::NaivePull),
        SchemeId::NaivePush => (ServerSetup::NaivePush, ClientSetup::NaivePush),
        SchemeId::DiffieHellman => {
            let group = config.group.clone().ok_or_else(|| missing("a DH group", scheme))?;
            (
                ServerSetup::DiffieHellman { group: group.clone(), secret: None },
                ClientSetup::DiffieHellman { group, secret: None },
            )
        }
        SchemeId::BlindRsa => {
            let keys = config.rsa.clone().ok_or_else(|| missing("an RSA key pair", scheme))?;
            let public = keys.public();
            (ServerSetup::BlindRsa { keys, published: None }, ClientSetup::BlindRsa { public })
        }
        SchemeId::PaillierPolynomial => {
            let keys = config.paillier.clone().ok_or_else(|| missing("a Paillier key pair", scheme))?;
            (
                ServerSetup::PaillierPolynomial { public: keys.public.clone(), bins: config.fnp_bins },
                ClientSetup::PaillierPolynomial { keys, bins: config.fnp_bins, expected_responses: Some(server_size) },
            )
        }
    })
}

/// Runs `scheme` in memory between a server holding `x` and a client holding `y`.
pub fn run_psi(
    scheme: SchemeId,
    x: &[ElementDigest],
    y: &[ElementDigest],
    config: &PsiConfig,
    rng: &mut dyn SecureRng,
) -> Result<(Vec<TranscriptMessage>, PsiResult), ProtocolError> {
    let x = Arc::new(dedup_in_order(x.to_vec()));
    let (server_setup, client_setup) = setups_for(scheme, config, x.len())?;
    let mut server = PsiSession::server(server_setup, x, config.digest_len)?;
    let mut client = PsiSession::client(client_setup, y.to_vec(), config.digest_len)?;
    run_sessions(&mut server, &mut client, rng)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::{Rng, RngCore};

    pub fn random_digest(rng: &mut impl RngCore, len: usize) -> ElementDigest {
        let mut b = vec![0u8; len];
        rng.fill_bytes(&mut b);
        ElementDigest::from_bytes(b)
    }

    /// Random (X, Y) with a random overlap.
    pub fn random_sets(rng: &mut impl RngCore, m: usize, n: usize) -> (Vec<ElementDigest>, Vec<ElementDigest>) {
        let x: Vec<_> = (0..m).map(|_| random_digest(rng, 32)).collect();
        let overlap = if m == 0 { 0 } else { rng.gen_range(0..=n.min(m)) };
        let mut y: Vec<_> = x.iter().take(overlap).cloned().collect();
        y.extend((overlap..n).map(|_| random_digest(rng, 32)));
        (x, y)
    }
}
