//! Town-partitioned digest store.
//!
//! On disk a store is a directory holding `manifest.json` and one partition
//! file per town. A partition file is the town's digests, sorted and
//! concatenated at the fixed digest width. Its name is the lowercase hex of
//! the town's UTF-8 bytes plus `.bin`, so any town string maps to a safe file
//! name.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::encoding::{canonicalize_bucket, point_digest, ElementDigest, EncodingParams, TrailPoint};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_TOWN: &str = "default";
const MANIFEST_VERSION: u32 = 1;

/// One line of a trail file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailRecord {
    pub lat: String,
    pub lon: String,
    pub t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub town: Option<String>,
}

impl TrailRecord {
    pub fn point(&self) -> TrailPoint {
        TrailPoint::new(self.lat.clone(), self.lon.clone(), self.t)
    }

    pub fn town_or_default(&self) -> &str {
        self.town.as_deref().filter(|t| !t.is_empty()).unwrap_or(DEFAULT_TOWN)
    }
}

/// Parses NDJSON trail records. Blank lines are skipped; errors name the
/// 1-based line.
pub fn read_trail_records(path: &Path) -> Result<Vec<TrailRecord>, NetError> {
    let file = fs::File::open(path).map_err(|e| NetError::Store(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrailRecord = serde_json::from_str(&line)
            .map_err(|e| NetError::Store(format!("{}:{}: {e}", path.display(), i + 1)))?;
        canonicalize_bucket(&rec.point(), 0)
            .map_err(|e| NetError::Store(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TownEntry {
    pub count: usize,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub params: EncodingParams,
    pub towns: BTreeMap<String, TownEntry>,
}

/// Immutable once loaded; partitions are shared with sessions by `Arc`.
#[derive(Clone, Debug)]
pub struct TrailStore {
    params: EncodingParams,
    partitions: BTreeMap<String, Arc<Vec<ElementDigest>>>,
}

pub fn partition_file_name(town: &str) -> String {
    let hex: String = town.bytes().map(|b| format!("{b:02x}")).collect();
    format!("{hex}.bin")
}

impl TrailStore {
    pub fn from_partitions(params: EncodingParams, partitions: BTreeMap<String, BTreeSet<ElementDigest>>) -> Result<Self, NetError> {
        params.validate()?;
        let width = params.digest_len();
        if let Some(d) = partitions.values().flatten().find(|d| d.len() != width) {
            return Err(NetError::Store(format!("digest {} is not {width} bytes", d.to_hex())));
        }
        Ok(TrailStore {
            params,
            partitions: partitions.into_iter().map(|(t, s)| (t, Arc::new(s.into_iter().collect()))).collect(),
        })
    }

    /// Digests of the records, one per point at its own time bucket.
    pub fn from_records(params: EncodingParams, records: &[TrailRecord]) -> Result<Self, NetError> {
        let mut parts: BTreeMap<String, BTreeSet<ElementDigest>> = BTreeMap::new();
        for r in records {
            parts.entry(r.town_or_default().to_string()).or_default().insert(point_digest(&r.point(), &params)?);
        }
        Self::from_partitions(params, parts)
    }

    pub fn params(&self) -> &EncodingParams {
        &self.params
    }

    pub fn towns(&self) -> impl Iterator<Item = &str> {
        self.partitions.keys().map(String::as_str)
    }

    pub fn partition(&self, town: &str) -> Option<Arc<Vec<ElementDigest>>> {
        self.partitions.get(town).cloned()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            version: MANIFEST_VERSION,
            params: self.params,
            towns: self
                .partitions
                .iter()
                .map(|(t, d)| (t.clone(), TownEntry { count: d.len(), file: partition_file_name(t) }))
                .collect(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), NetError> {
        fs::create_dir_all(dir)?;
        for (town, digests) in &self.partitions {
            let bytes: Vec<u8> = digests.iter().flat_map(|d| d.as_bytes().iter().copied()).collect();
            fs::write(dir.join(partition_file_name(town)), bytes)?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        fs::write(dir.join(MANIFEST_FILE), manifest + "\n")?;
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<Self, NetError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| NetError::Store(format!("{}: {e}", path.display())))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| NetError::Store(format!("{}: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(NetError::Store(format!("unsupported manifest version {}", manifest.version)));
        }
        manifest.params.validate()?;
        let width = manifest.params.digest_len();
        let mut partitions = BTreeMap::new();
        for (town, entry) in &manifest.towns {
            let file: PathBuf = dir.join(&entry.file);
            let bytes = fs::read(&file).map_err(|e| NetError::Store(format!("{}: {e}", file.display())))?;
            if bytes.len() != entry.count * width {
                return Err(NetError::Store(format!(
                    "{}: {} bytes, manifest promises {} digests of {width} bytes",
                    file.display(),
                    bytes.len(),
                    entry.count
                )));
            }
            let set: BTreeSet<ElementDigest> = bytes.chunks(width).map(ElementDigest::from_bytes).collect();
            if set.len() != entry.count {
                return Err(NetError::Store(format!("{}: duplicate digests", file.display())));
            }
            partitions.insert(town.clone(), set);
        }
        Self::from_partitions(manifest.params, partitions)
    }

    /// Adds every record of an NDJSON file to the store at `dir`, creating it
    /// if absent. Ingesting the same file twice leaves the store unchanged.
    pub fn ingest(input: &Path, dir: &Path, params: EncodingParams) -> Result<Self, NetError> {
        let records = read_trail_records(input)?;
        let mut parts: BTreeMap<String, BTreeSet<ElementDigest>> = BTreeMap::new();
        if dir.join(MANIFEST_FILE).exists() {
            let existing = Self::open(dir)?;
            if existing.params != params {
                return Err(NetError::Store(format!(
                    "store was built with {:?}, refusing to mix in {:?}",
                    existing.params, params
                )));
            }
            for (town, d) in existing.partitions {
                parts.insert(town, d.iter().cloned().collect());
            }
        }
        for r in &records {
            parts.entry(r.town_or_default().to_string()).or_default().insert(point_digest(&r.point(), &params)?);
        }
        let store = Self::from_partitions(params, parts)?;
        store.save(dir)?;
        log::info!("ingested {} records into {}", records.len(), dir.display());
        Ok(store)
    }
}
