//! PSI over TCP: a town-partitioned store, a threaded server and a blocking
//! client, speaking a length-prefixed frame protocol (see [`wire`]).
//!
//! A connection carries exactly one session:
//!
//! 1. client sends a handshake frame with its parameters,
//! 2. server answers with its own handshake or an error frame,
//! 3. both drive their state machines, one transcript message per frame.
//!
//! Client handshake parameters are the declared set size, followed for the
//! polynomial scheme by the Paillier modulus and the bin count. The server
//! answers with `N, e` (Blind RSA), `p, g` (DH), its set size (polynomial) or
//! nothing (naive schemes). A server message carrying a final result list goes
//! in a result frame; everything else in transcript frames.

use thiserror::Error;

use crate::crypto::CryptoError;
use crate::encoding::EncodingError;
use crate::protocol::ProtocolError;

mod client;
mod config;
mod risk;
mod server;
mod store;
pub mod wire;

pub use client::{expand_points, query, query_detailed, query_digests, QueryConfig, QueryOutcome};
pub use config::{load_group, ServerFileConfig, DEFAULT_LISTEN};
pub use risk::{risk_score, BucketCount, RiskReport};
pub use server::{RunningServer, Server, ServerConfig, ServerKeys, ShutdownHandle};
pub use store::{partition_file_name, read_trail_records, Manifest, TownEntry, TrailRecord, TrailStore, DEFAULT_TOWN, MANIFEST_FILE};
pub use wire::{ErrorCode, FrameType, Handshake, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("server rejected the session ({}): {message}", code.map_or("unknown code", ErrorCode::label))]
    Rejected { code: Option<ErrorCode>, message: String },
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("store error: {0}")]
    Store(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}
