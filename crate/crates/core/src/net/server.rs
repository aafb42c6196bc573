use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::store::TrailStore;
use super::wire::{encode_error, read_frame, write_frame, ErrorCode, FrameType, Handshake, PROTOCOL_VERSION};
use super::NetError;
use crate::crypto::{DhGroup, PaillierPublicKey, RsaKeyPair};
use crate::encoding::ElementDigest;
use crate::protocol::{blind_rsa, Direction, PayloadKind, ProtocolError, PsiSession, SchemeId, ServerSetup, TranscriptMessage};

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub schemes: Vec<SchemeId>,
    pub max_client_elements: usize,
    pub max_frame_bytes: usize,
    /// Per-read timeout on client sockets.
    pub io_timeout: Option<Duration>,
    pub min_paillier_bits: u64,
    pub max_paillier_bits: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            schemes: SchemeId::ALL.to_vec(),
            max_client_elements: 1 << 10,
            max_frame_bytes: super::wire::DEFAULT_MAX_FRAME,
            io_timeout: Some(Duration::from_secs(900)),
            min_paillier_bits: 512,
            max_paillier_bits: 8192,
        }
    }
}

/// Long-lived key material. Each is needed only for its scheme.
#[derive(Clone, Debug, Default)]
pub struct ServerKeys {
    pub rsa: Option<Arc<RsaKeyPair>>,
    pub group: Option<DhGroup>,
}

struct Shared {
    store: TrailStore,
    config: ServerConfig,
    keys: ServerKeys,
    /// Blind-RSA offline lists per town, computed on first use.
    published: Mutex<HashMap<String, Arc<Vec<ElementDigest>>>>,
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
}

/// Stops a running server: no new sessions are accepted and in-flight ones
/// run to completion.
#[derive(Clone, Debug)]
pub struct ShutdownHandle {
    stop: Arc<AtomicBool>,
    addr: SocketAddr,
}

impl ShutdownHandle {
    pub fn shutdown(&self) {
        if !self.stop.swap(true, Ordering::SeqCst) {
            // wake the blocking accept
            let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
        }
    }
}

pub struct RunningServer {
    pub addr: SocketAddr,
    pub shutdown: ShutdownHandle,
    handle: JoinHandle<Result<(), NetError>>,
}

impl RunningServer {
    /// Requests shutdown and waits for every session to finish.
    pub fn stop(self) -> Result<(), NetError> {
        self.shutdown.shutdown();
        self.handle.join().map_err(|_| NetError::Connection("server thread panicked".into()))?
    }
}

impl Server {
    pub fn bind(addr: &str, store: TrailStore, config: ServerConfig, keys: ServerKeys) -> Result<Self, NetError> {
        let listener = TcpListener::bind(addr).map_err(|e| NetError::Connection(format!("bind {addr}: {e}")))?;
        Ok(Server {
            listener,
            shared: Arc::new(Shared { store, config, keys, published: Mutex::new(HashMap::new()) }),
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, NetError> {
        Ok(self.listener.local_addr()?)
    }

    pub fn shutdown_handle(&self) -> Result<ShutdownHandle, NetError> {
        let mut addr = self.local_addr()?;
        if addr.ip().is_unspecified() {
            addr.set_ip(std::net::Ipv4Addr::LOCALHOST.into());
        }
        Ok(ShutdownHandle { stop: self.stop.clone(), addr })
    }

    /// Accepts connections until shut down, one thread per session.
    pub fn run(self) -> Result<(), NetError> {
        log::info!("listening on {}", self.local_addr()?);
        let mut sessions: Vec<JoinHandle<()>> = Vec::new();
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            sessions.retain(|h| !h.is_finished());
            let shared = self.shared.clone();
            sessions.push(thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                match handle_connection(stream, &shared) {
                    Ok(()) => log::debug!("session with {peer} done"),
                    Err(e) => log::warn!("session with {peer} failed: {e}"),
                }
            }));
        }
        for h in sessions {
            let _ = h.join();
        }
        log::info!("server stopped");
        Ok(())
    }

    pub fn spawn(self) -> Result<RunningServer, NetError> {
        let addr = self.local_addr()?;
        let shutdown = self.shutdown_handle()?;
        let handle = thread::spawn(move || self.run());
        Ok(RunningServer { addr, shutdown, handle })
    }
}

struct Rejection(ErrorCode, String);

fn reject<T>(code: ErrorCode, message: impl Into<String>) -> Result<T, Rejection> {
    Err(Rejection(code, message.into()))
}

fn small_param(params: &[BigUint], i: usize, what: &str) -> Result<usize, Rejection> {
    match params.get(i).map(|v| v.to_usize()) {
        Some(Some(v)) => Ok(v),
        Some(None) => reject(ErrorCode::LimitExceeded, format!("{what} out of range")),
        None => reject(ErrorCode::Protocol, format!("handshake lacks {what}")),
    }
}

/// Validates the client handshake and builds the server side of the session.
/// Server setup, the partition to serve and the reply parameters.
type Negotiated = (ServerSetup, Arc<Vec<ElementDigest>>, Vec<BigUint>);

fn negotiate(hs: &Handshake, shared: &Shared) -> Result<Negotiated, Rejection> {
    let cfg = &shared.config;
    if hs.version != PROTOCOL_VERSION {
        return reject(ErrorCode::Unsupported, format!("protocol version {} (server speaks {PROTOCOL_VERSION})", hs.version));
    }
    let Some(scheme) = hs.scheme_id() else {
        return reject(ErrorCode::Unsupported, format!("unknown scheme tag {:#04x}", hs.scheme));
    };
    if !cfg.schemes.contains(&scheme) {
        return reject(ErrorCode::Unsupported, format!("scheme {scheme} is not enabled"));
    }
    if hs.model_id() != Some(scheme.model()) {
        return reject(ErrorCode::Unsupported, format!("model tag {} does not fit {scheme}", hs.model));
    }
    let Some(set) = shared.store.partition(&hs.town) else {
        return reject(ErrorCode::UnknownTown, format!("no partition for town '{}'", hs.town));
    };
    let declared = small_param(&hs.params, 0, "declared set size")?;
    if declared > cfg.max_client_elements {
        return reject(
            ErrorCode::LimitExceeded,
            format!("client declares {declared} elements, limit is {}", cfg.max_client_elements),
        );
    }
    Ok(match scheme {
        SchemeId::NaivePull => (ServerSetup::NaivePull, set, vec![]),
        SchemeId::NaivePush => (ServerSetup::NaivePush, set, vec![]),
        SchemeId::DiffieHellman => {
            let Some(group) = shared.keys.group.clone() else {
                return reject(ErrorCode::Unsupported, "server has no DH group");
            };
            let reply = vec![group.p.clone(), group.g.clone()];
            (ServerSetup::DiffieHellman { group, secret: None }, set, reply)
        }
        SchemeId::BlindRsa => {
            let Some(keys) = shared.keys.rsa.clone() else {
                return reject(ErrorCode::Unsupported, "server has no RSA key");
            };
            let published = published_list(shared, &hs.town, &keys, &set);
            let reply = vec![keys.n.clone(), keys.e.clone()];
            (ServerSetup::BlindRsa { keys, published: Some(published) }, set, reply)
        }
        SchemeId::PaillierPolynomial => {
            let Some(u) = hs.params.get(1) else {
                return reject(ErrorCode::Protocol, "handshake lacks the Paillier modulus");
            };
            if u.bits() < cfg.min_paillier_bits || u.bits() > cfg.max_paillier_bits || !u.bit(0) {
                return reject(
                    ErrorCode::Unsupported,
                    format!("Paillier modulus of {} bits outside {}..={}", u.bits(), cfg.min_paillier_bits, cfg.max_paillier_bits),
                );
            }
            let bins = small_param(&hs.params, 2, "bin count")?;
            if bins == 0 || bins > cfg.max_client_elements.max(1) {
                return reject(ErrorCode::LimitExceeded, format!("bin count {bins} outside 1..={}", cfg.max_client_elements));
            }
            let Ok(public) = PaillierPublicKey::from_modulus(u.clone()) else {
                return reject(ErrorCode::Unsupported, "invalid Paillier modulus");
            };
            let reply = vec![BigUint::from(set.len())];
            (ServerSetup::PaillierPolynomial { public, bins }, set, reply)
        }
    })
}

fn published_list(shared: &Shared, town: &str, keys: &RsaKeyPair, set: &[ElementDigest]) -> Arc<Vec<ElementDigest>> {
    if let Some(p) = shared.published.lock().expect("cache lock").get(town) {
        return p.clone();
    }
    let list = Arc::new(blind_rsa::publish(keys, set, shared.store.params().digest_len(), &mut rand::thread_rng()));
    shared.published.lock().expect("cache lock").entry(town.to_string()).or_insert(list).clone()
}

/// Largest client message the limit allows, by payload kind.
fn entry_limit(kind: PayloadKind, max: usize, setup_bins: usize) -> usize {
    match kind {
        PayloadKind::CiphertextList => setup_bins.saturating_mul(max.saturating_add(1)),
        _ => max,
    }
}

fn send_message(w: &mut impl Write, msg: &TranscriptMessage) -> Result<(), NetError> {
    let ty = if msg.kind == PayloadKind::ResultList { FrameType::Result } else { FrameType::Transcript };
    write_frame(w, ty, &msg.encode())?;
    Ok(())
}

fn send_error(w: &mut impl Write, code: ErrorCode, message: &str) -> Result<(), NetError> {
    log::info!("rejecting session ({}): {message}", code.label());
    write_frame(w, FrameType::Error, &encode_error(code, message))?;
    Ok(())
}

fn handle_connection(stream: TcpStream, shared: &Shared) -> Result<(), NetError> {
    let cfg = &shared.config;
    stream.set_read_timeout(cfg.io_timeout)?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);

    let Some((ty, payload)) = read_frame(&mut reader, cfg.max_frame_bytes)? else {
        return Ok(());
    };
    if ty != FrameType::Handshake {
        return send_error(&mut writer, ErrorCode::Protocol, "expected a handshake frame");
    }
    let hs = match Handshake::decode(&payload) {
        Ok(h) => h,
        Err(e) => return send_error(&mut writer, ErrorCode::Protocol, &e.to_string()),
    };
    let (setup, set, reply_params) = match negotiate(&hs, shared) {
        Ok(v) => v,
        Err(Rejection(code, msg)) => return send_error(&mut writer, code, &msg),
    };
    let bins = match &setup {
        ServerSetup::PaillierPolynomial { bins, .. } => *bins,
        _ => 1,
    };
    let scheme = setup.scheme();
    let reply = Handshake::new(scheme, hs.town.clone(), reply_params);
    write_frame(&mut writer, FrameType::Handshake, &reply.encode())?;
    log::debug!("session {scheme} for town '{}' against {} elements", hs.town, set.len());

    let digest_len = shared.store.params().digest_len();
    let mut session = PsiSession::server(setup, set, digest_len)?;
    let mut rng = rand::thread_rng();
    let outcome = (|| -> Result<(), NetError> {
        for msg in session.start(&mut rng)? {
            send_message(&mut writer, &msg)?;
        }
        while !session.is_finished() {
            let Some((ty, payload)) = read_frame(&mut reader, cfg.max_frame_bytes)? else {
                log::debug!("client closed the connection mid-session");
                return Ok(());
            };
            match ty {
                FrameType::Transcript => {}
                FrameType::Error => {
                    let (_, _, msg) = super::wire::decode_error(&payload);
                    log::info!("client aborted: {msg}");
                    return Ok(());
                }
                other => return Err(ProtocolError::Violation(format!("unexpected {other:?} frame from client")).into()),
            }
            let msg = TranscriptMessage::decode(&payload, Direction::ClientToServer, digest_len)?;
            if msg.entry_count() > entry_limit(msg.kind, cfg.max_client_elements, bins) {
                send_error(
                    &mut writer,
                    ErrorCode::LimitExceeded,
                    &format!("{} entries exceed the limit of {}", msg.entry_count(), cfg.max_client_elements),
                )?;
                return Ok(());
            }
            for reply in session.receive(&msg, &mut rng)? {
                send_message(&mut writer, &reply)?;
            }
        }
        Ok(())
    })();
    if let Err(e) = &outcome {
        if matches!(e, NetError::Protocol(_) | NetError::Malformed(_)) {
            let _ = send_error(&mut writer, ErrorCode::Protocol, &e.to_string());
        }
    }
    outcome
}
