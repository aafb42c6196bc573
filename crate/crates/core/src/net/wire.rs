//! Framing and handshake encoding.
//!
//! ```text
//! frame     = length:u32be type:u8 payload     (length counts type + payload)
//! handshake = version:u8 scheme:u8 model:u8 town_len:u32be town:utf8
//!             count:u16be (len:u32be magnitude:be-bytes){count}
//! error     = code:u8 message:utf8
//! ```
//!
//! Transcript and result frames carry one encoded transcript message each.

use std::io::{self, Read, Write};

use num_bigint::BigUint;

use super::NetError;
use crate::protocol::{Model, SchemeId};

pub const PROTOCOL_VERSION: u8 = 1;

/// Upper bound on a single frame unless configured otherwise.
pub const DEFAULT_MAX_FRAME: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    Handshake = 0x00,
    Error = 0x01,
    Transcript = 0x02,
    Result = 0x03,
}

impl FrameType {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x00 => Some(FrameType::Handshake),
            0x01 => Some(FrameType::Error),
            0x02 => Some(FrameType::Transcript),
            0x03 => Some(FrameType::Result),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ErrorCode {
    Unsupported = 0x01,
    LimitExceeded = 0x02,
    Protocol = 0x03,
    UnknownTown = 0x04,
}

impl ErrorCode {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(ErrorCode::Unsupported),
            0x02 => Some(ErrorCode::LimitExceeded),
            0x03 => Some(ErrorCode::Protocol),
            0x04 => Some(ErrorCode::UnknownTown),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorCode::Unsupported => "unsupported",
            ErrorCode::LimitExceeded => "limit-exceeded",
            ErrorCode::Protocol => "protocol",
            ErrorCode::UnknownTown => "unknown-town",
        }
    }
}

pub fn model_tag(model: Model) -> u8 {
    match model {
        Model::Pull => 0,
        Model::Push => 1,
        Model::Hybrid => 2,
    }
}

pub fn model_from_tag(tag: u8) -> Option<Model> {
    match tag {
        0 => Some(Model::Pull),
        1 => Some(Model::Push),
        2 => Some(Model::Hybrid),
        _ => None,
    }
}

pub fn write_frame(w: &mut impl Write, ty: FrameType, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len() + 1).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    let mut buf = Vec::with_capacity(5 + payload.len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.push(ty as u8);
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()
}

/// Reads one frame. `Ok(None)` on a clean end of stream before any byte.
pub fn read_frame(r: &mut impl Read, max_len: usize) -> Result<Option<(FrameType, Vec<u8>)>, NetError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(NetError::Connection("stream closed inside a frame header".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len == 0 {
        return Err(NetError::Malformed("zero-length frame".into()));
    }
    if len > max_len {
        return Err(NetError::Malformed(format!("frame of {len} bytes exceeds limit {max_len}")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    let ty = FrameType::from_byte(body[0]).ok_or_else(|| NetError::Malformed(format!("unknown frame type {:#04x}", body[0])))?;
    body.remove(0);
    Ok(Some((ty, body)))
}

/// Handshake as it appears on the wire. Scheme and model stay raw bytes so
/// that unknown values can be carried and rejected by the receiver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handshake {
    pub version: u8,
    pub scheme: u8,
    pub model: u8,
    pub town: String,
    pub params: Vec<BigUint>,
}

impl Handshake {
    pub fn new(scheme: SchemeId, town: impl Into<String>, params: Vec<BigUint>) -> Self {
        Handshake {
            version: PROTOCOL_VERSION,
            scheme: scheme.tag(),
            model: model_tag(scheme.model()),
            town: town.into(),
            params,
        }
    }

    pub fn scheme_id(&self) -> Option<SchemeId> {
        SchemeId::from_tag(self.scheme)
    }

    pub fn model_id(&self) -> Option<Model> {
        model_from_tag(self.model)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.version, self.scheme, self.model];
        out.extend_from_slice(&(self.town.len() as u32).to_be_bytes());
        out.extend_from_slice(self.town.as_bytes());
        out.extend_from_slice(&(self.params.len() as u16).to_be_bytes());
        for p in &self.params {
            let bytes = p.to_bytes_be();
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, NetError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let version = cur.u8()?;
        let scheme = cur.u8()?;
        let model = cur.u8()?;
        let town_len = cur.u32()? as usize;
        let town = String::from_utf8(cur.take(town_len)?.to_vec())
            .map_err(|_| NetError::Malformed("town is not UTF-8".into()))?;
        let count = u16::from_be_bytes(cur.take(2)?.try_into().expect("two bytes"));
        let mut params = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = cur.u32()? as usize;
            params.push(BigUint::from_bytes_be(cur.take(len)?));
        }
        if cur.pos != bytes.len() {
            return Err(NetError::Malformed("trailing bytes after handshake".into()));
        }
        Ok(Handshake { version, scheme, model, town, params })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NetError::Malformed("handshake truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("four bytes")))
    }
}

pub fn encode_error(code: ErrorCode, message: &str) -> Vec<u8> {
    let mut out = vec![code as u8];
    out.extend_from_slice(message.as_bytes());
    out
}

pub fn decode_error(payload: &[u8]) -> (Option<ErrorCode>, u8, String) {
    match payload.split_first() {
        Some((&code, msg)) => (ErrorCode::from_byte(code), code, String::from_utf8_lossy(msg).into_owned()),
        None => (None, 0, String::new()),
    }
}
