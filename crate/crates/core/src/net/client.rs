use std::collections::{HashMap, HashSet};
use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::risk::{risk_score, RiskReport};
use super::wire::{decode_error, read_frame, write_frame, FrameType, Handshake, DEFAULT_MAX_FRAME, PROTOCOL_VERSION};
use super::NetError;
use crate::crypto::{DhGroup, PaillierKeyPair, RsaPublicKey};
use crate::encoding::{expand_window, ElementDigest, EncodingParams, TrailPoint};
use crate::protocol::{ClientSetup, Direction, PsiResult, PsiSession, SchemeId, TranscriptMessage};

#[derive(Clone, Debug)]
pub struct QueryConfig {
    pub scheme: SchemeId,
    pub town: String,
    /// Must match the server store's parameters.
    pub params: EncodingParams,
    /// Key pair for the polynomial scheme; generated per query when absent.
    pub paillier: Option<Arc<PaillierKeyPair>>,
    /// Modulus size of a generated Paillier key.
    pub paillier_bits: u64,
    /// Polynomial bins; `None` uses one bin per client element.
    pub fnp_bins: Option<usize>,
    pub connect_timeout: Duration,
    /// Per-read timeout while waiting for the server.
    pub io_timeout: Option<Duration>,
    pub max_frame_bytes: usize,
}

impl QueryConfig {
    pub fn new(scheme: SchemeId, town: impl Into<String>) -> Self {
        QueryConfig {
            scheme,
            town: town.into(),
            params: EncodingParams::default(),
            paillier: None,
            paillier_bits: 512,
            fnp_bins: None,
            connect_timeout: Duration::from_secs(10),
            io_timeout: Some(Duration::from_secs(1800)),
            max_frame_bytes: DEFAULT_MAX_FRAME,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QueryOutcome {
    pub result: PsiResult,
    /// Frame types in the order they crossed the wire, handshakes included.
    pub frames_sent: Vec<FrameType>,
    pub frames_received: Vec<FrameType>,
}

/// Client digests for every point's time window, deduplicated in first-seen
/// order, with the bucket each digest stands for.
pub fn expand_points(
    points: &[TrailPoint],
    params: &EncodingParams,
) -> Result<(Vec<ElementDigest>, HashMap<ElementDigest, u64>), NetError> {
    let mut order = Vec::new();
    let mut buckets = HashMap::new();
    for p in points {
        for (bucket, d) in expand_window(p, params)? {
            if let std::collections::hash_map::Entry::Vacant(slot) = buckets.entry(d.clone()) {
                slot.insert(bucket);
                order.push(d);
            }
        }
    }
    Ok((order, buckets))
}

/// Runs the client role for the given trail and scores the matches.
pub fn query(addr: &str, points: &[TrailPoint], config: &QueryConfig) -> Result<RiskReport, NetError> {
    query_detailed(addr, points, config).map(|(report, _)| report)
}

pub fn query_detailed(addr: &str, points: &[TrailPoint], config: &QueryConfig) -> Result<(RiskReport, QueryOutcome), NetError> {
    let (digests, buckets) = expand_points(points, &config.params)?;
    let outcome = query_digests(addr, digests, config)?;
    Ok((risk_score(&outcome.result.matched, &buckets), outcome))
}

fn connect(addr: &str, timeout: Duration) -> Result<TcpStream, NetError> {
    let addrs = addr.to_socket_addrs().map_err(|e| NetError::Connection(format!("{addr}: {e}")))?;
    let mut last = None;
    for a in addrs {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(NetError::Connection(match last {
        Some(e) => format!("{addr}: {e}"),
        None => format!("{addr}: no address"),
    }))
}

fn expect_param<'a>(params: &'a [BigUint], i: usize, what: &str) -> Result<&'a BigUint, NetError> {
    params.get(i).ok_or_else(|| NetError::Malformed(format!("server handshake lacks {what}")))
}

/// Runs the client role over already-encoded digests.
pub fn query_digests(addr: &str, digests: Vec<ElementDigest>, config: &QueryConfig) -> Result<QueryOutcome, NetError> {
    let mut seen = HashSet::with_capacity(digests.len());
    let digests: Vec<ElementDigest> = digests.into_iter().filter(|d| seen.insert(d.clone())).collect();
    let digest_len = config.params.digest_len();
    if let Some(d) = digests.iter().find(|d| d.len() != digest_len) {
        return Err(NetError::Config(format!("digest {} is not {digest_len} bytes", d.to_hex())));
    }
    let mut rng = rand::thread_rng();
    let scheme = config.scheme;

    let mut params = vec![BigUint::from(digests.len())];
    let mut fnp = None;
    if scheme == SchemeId::PaillierPolynomial {
        let keys = match &config.paillier {
            Some(k) => k.clone(),
            None => Arc::new(PaillierKeyPair::generate(config.paillier_bits / 2, &mut rng)?),
        };
        let bins = config.fnp_bins.unwrap_or(digests.len()).max(1);
        params.push(keys.public.modulus().clone());
        params.push(BigUint::from(bins));
        fnp = Some((keys, bins));
    }

    let stream = connect(addr, config.connect_timeout)?;
    stream.set_read_timeout(config.io_timeout)?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut sent = Vec::new();
    let mut received = Vec::new();

    write_frame(&mut writer, FrameType::Handshake, &Handshake::new(scheme, config.town.clone(), params).encode())?;
    sent.push(FrameType::Handshake);

    let mut next = |received: &mut Vec<FrameType>| -> Result<(FrameType, Vec<u8>), NetError> {
        let (ty, payload) = read_frame(&mut reader, config.max_frame_bytes)?
            .ok_or_else(|| NetError::Connection("server closed the connection".into()))?;
        received.push(ty);
        if ty == FrameType::Error {
            let (code, _, message) = decode_error(&payload);
            return Err(NetError::Rejected { code, message });
        }
        Ok((ty, payload))
    };

    let (ty, payload) = next(&mut received)?;
    if ty != FrameType::Handshake {
        return Err(NetError::Malformed(format!("expected handshake reply, got {ty:?}")));
    }
    let reply = Handshake::decode(&payload)?;
    if reply.version != PROTOCOL_VERSION || reply.scheme_id() != Some(scheme) {
        return Err(NetError::Malformed("server handshake does not echo the session".into()));
    }
    let setup = match scheme {
        SchemeId::NaivePull => ClientSetup::NaivePull,
        SchemeId::NaivePush => ClientSetup::NaivePush,
        SchemeId::DiffieHellman => {
            let group = DhGroup::from_safe_prime(expect_param(&reply.params, 0, "p")?.clone())?;
            if *expect_param(&reply.params, 1, "g")? != group.g {
                return Err(NetError::Malformed("unexpected DH generator".into()));
            }
            group.validate(&mut rng)?;
            ClientSetup::DiffieHellman { group, secret: None }
        }
        SchemeId::BlindRsa => {
            let n = expect_param(&reply.params, 0, "N")?.clone();
            let e = expect_param(&reply.params, 1, "e")?.clone();
            if !n.bit(0) || n.bits() < 64 || e < BigUint::from(3u8) {
                return Err(NetError::Malformed("implausible RSA public key".into()));
            }
            ClientSetup::BlindRsa { public: RsaPublicKey { n, e } }
        }
        SchemeId::PaillierPolynomial => {
            let (keys, bins) = fnp.take().expect("set above");
            let m = expect_param(&reply.params, 0, "server set size")?
                .to_usize()
                .ok_or_else(|| NetError::Malformed("server set size out of range".into()))?;
            ClientSetup::PaillierPolynomial { keys, bins, expected_responses: Some(m) }
        }
    };

    let mut session = PsiSession::client(setup, digests, digest_len)?;
    for msg in session.start(&mut rng)? {
        write_frame(&mut writer, FrameType::Transcript, &msg.encode())?;
        sent.push(FrameType::Transcript);
    }
    while !session.is_finished() {
        let (ty, payload) = next(&mut received)?;
        if !matches!(ty, FrameType::Transcript | FrameType::Result) {
            return Err(NetError::Malformed(format!("unexpected {ty:?} frame mid-session")));
        }
        let msg = TranscriptMessage::decode(&payload, Direction::ServerToClient, digest_len)?;
        for reply in session.receive(&msg, &mut rng)? {
            write_frame(&mut writer, FrameType::Transcript, &reply.encode())?;
            sent.push(FrameType::Transcript);
        }
    }
    let result = session
        .take_result()
        .ok_or_else(|| NetError::Malformed("session finished without a result".into()))?;
    Ok(QueryOutcome { result, frames_sent: sent, frames_received: received })
}
