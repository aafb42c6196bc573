//! Trail encoding: GPS samples to fixed-width canonical strings and digests.
//!
//! A canonical element is 36 ASCII bytes: 10 latitude digits, 10 longitude
//! digits and the 16-digit zero-padded time bucket index. Coordinates use a
//! fixed-point decimal convention so encoding is bit-exact everywhere:
//!
//! ```text
//!   digit 0      hemisphere: 0 = north/east, 1 = south/west
//!   digits 1..4  integer degrees, zero padded (000-180)
//!   digits 4..10 millionths of a degree
//! ```
//!
//! So 12.9716 N is `0012971600` and 77.5946 W is `1077594600`. Only the
//! shape (ten ASCII digits) is validated; the convention is applied by
//! [`TrailPoint::from_degrees`].

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const COORD_DIGITS: usize = 10;
pub const TIME_DIGITS: usize = 16;
pub const CANONICAL_LEN: usize = 2 * COORD_DIGITS + TIME_DIGITS;

const SUPPORTED_BETA: [u32; 3] = [128, 160, 256];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodingError {
    #[error("malformed {field}: {reason}")]
    Malformed { field: &'static str, reason: String },
    #[error("invalid encoding parameters: {0}")]
    Config(String),
}

/// One GPS sample.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrailPoint {
    pub lat_digits: String,
    pub lon_digits: String,
    pub timestamp_s: u64,
}

impl TrailPoint {
    pub fn new(lat: impl Into<String>, lon: impl Into<String>, timestamp_s: u64) -> Self {
        TrailPoint { lat_digits: lat.into(), lon_digits: lon.into(), timestamp_s }
    }

    /// Formats signed decimal degrees with the fixed-point convention above.
    pub fn from_degrees(lat: f64, lon: f64, timestamp_s: u64) -> Result<Self, EncodingError> {
        Ok(TrailPoint {
            lat_digits: format_coordinate("lat", lat, 90.0)?,
            lon_digits: format_coordinate("lon", lon, 180.0)?,
            timestamp_s,
        })
    }
}

fn format_coordinate(field: &'static str, deg: f64, limit: f64) -> Result<String, EncodingError> {
    if !deg.is_finite() || deg.abs() > limit {
        return Err(EncodingError::Malformed { field, reason: format!("{deg} out of range") });
    }
    let hemisphere = if deg < 0.0 { 1 } else { 0 };
    let micro = (deg.abs() * 1e6).round() as u64;
    Ok(format!("{hemisphere}{micro:09}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingParams {
    pub alpha_bits: u32,
    pub beta_bits: u32,
    pub time_bucket_s: u64,
    pub window_buckets: u32,
}

impl Default for EncodingParams {
    fn default() -> Self {
        EncodingParams { alpha_bits: 512, beta_bits: 256, time_bucket_s: 3600, window_buckets: 3 }
    }
}

impl EncodingParams {
    pub fn validate(&self) -> Result<(), EncodingError> {
        if self.alpha_bits != 512 {
            return Err(EncodingError::Config(format!(
                "alpha_bits must be 512 (36-byte element), got {}",
                self.alpha_bits
            )));
        }
        if !SUPPORTED_BETA.contains(&self.beta_bits) {
            return Err(EncodingError::Config(format!(
                "beta_bits must be one of {SUPPORTED_BETA:?}, got {}",
                self.beta_bits
            )));
        }
        if self.time_bucket_s == 0 {
            return Err(EncodingError::Config("time_bucket_s must be positive".into()));
        }
        if self.window_buckets == 0 || self.window_buckets.is_multiple_of(2) {
            return Err(EncodingError::Config(format!(
                "window_buckets must be odd, got {}",
                self.window_buckets
            )));
        }
        Ok(())
    }

    pub fn digest_len(&self) -> usize {
        self.beta_bits as usize / 8
    }

    pub fn bucket_of(&self, timestamp_s: u64) -> u64 {
        timestamp_s / self.time_bucket_s
    }
}

/// Hashed set element: `beta_bits / 8` opaque bytes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementDigest(Vec<u8>);

impl ElementDigest {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        ElementDigest(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for ElementDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ElementDigest({})", self.to_hex())
    }
}

/// SHA-256 of `parts` concatenated, truncated to `len` bytes (`len <= 32`).
pub fn hash_truncated(parts: &[&[u8]], len: usize) -> ElementDigest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let out = h.finalize();
    ElementDigest(out[..len].to_vec())
}

fn check_digits(field: &'static str, s: &str) -> Result<(), EncodingError> {
    if s.len() != COORD_DIGITS {
        return Err(EncodingError::Malformed {
            field,
            reason: format!("expected {COORD_DIGITS} characters, got {}", s.len()),
        });
    }
    if !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(EncodingError::Malformed { field, reason: format!("non-digit in {s:?}") });
    }
    Ok(())
}

/// Canonical string for an explicit time bucket index.
pub fn canonicalize_bucket(point: &TrailPoint, bucket: u64) -> Result<[u8; CANONICAL_LEN], EncodingError> {
    check_digits("lat", &point.lat_digits)?;
    check_digits("lon", &point.lon_digits)?;
    if bucket >= 10u64.pow(TIME_DIGITS as u32) {
        return Err(EncodingError::Malformed {
            field: "timestamp",
            reason: format!("bucket {bucket} exceeds {TIME_DIGITS} digits"),
        });
    }
    let mut out = [0u8; CANONICAL_LEN];
    out[..COORD_DIGITS].copy_from_slice(point.lat_digits.as_bytes());
    out[COORD_DIGITS..2 * COORD_DIGITS].copy_from_slice(point.lon_digits.as_bytes());
    out[2 * COORD_DIGITS..].copy_from_slice(format!("{bucket:016}").as_bytes());
    Ok(out)
}

pub fn canonicalize(point: &TrailPoint, params: &EncodingParams) -> Result<[u8; CANONICAL_LEN], EncodingError> {
    params.validate()?;
    canonicalize_bucket(point, params.bucket_of(point.timestamp_s))
}

pub fn digest(canonical: &[u8], params: &EncodingParams) -> Result<ElementDigest, EncodingError> {
    params.validate()?;
    if canonical.len() != CANONICAL_LEN {
        return Err(EncodingError::Malformed {
            field: "canonical",
            reason: format!("expected {CANONICAL_LEN} bytes, got {}", canonical.len()),
        });
    }
    Ok(hash_truncated(&[canonical], params.digest_len()))
}

pub fn point_digest(point: &TrailPoint, params: &EncodingParams) -> Result<ElementDigest, EncodingError> {
    digest(&canonicalize(point, params)?, params)
}

/// Digests for the `window_buckets` buckets centred on the point's bucket,
/// each paired with its bucket index. Buckets below zero are dropped.
pub fn expand_window(
    point: &TrailPoint,
    params: &EncodingParams,
) -> Result<Vec<(u64, ElementDigest)>, EncodingError> {
    params.validate()?;
    let centre = params.bucket_of(point.timestamp_s);
    let half = u64::from(params.window_buckets / 2);
    if centre < half {
        log::warn!(
            "time window around bucket {centre} clamped at 0 ({} buckets dropped)",
            half - centre
        );
    }
    (centre.saturating_sub(half)..=centre + half)
        .map(|b| Ok((b, digest(&canonicalize_bucket(point, b)?, params)?)))
        .collect()
}
