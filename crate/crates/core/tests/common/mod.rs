#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use trailpsi::encoding::{expand_window, point_digest, ElementDigest, EncodingParams, TrailPoint};
use trailpsi::net::TrailRecord;

pub const T0: u64 = 1_600_000_000;

pub fn random_record<R: Rng>(rng: &mut R, town: Option<&str>) -> TrailRecord {
    let t = T0 + rng.gen_range(0..30 * 86_400);
    let p = TrailPoint::from_degrees(rng.gen_range(-89.0..89.0), rng.gen_range(-179.0..179.0), t).unwrap();
    TrailRecord { lat: p.lat_digits, lon: p.lon_digits, t, town: town.map(str::to_string) }
}

/// Server records plus a client trail in which `overlap` points copy a
/// server record and the rest are fresh.
pub fn trails<R: Rng>(rng: &mut R, m: usize, n: usize, overlap: usize) -> (Vec<TrailRecord>, Vec<TrailRecord>) {
    let server: Vec<TrailRecord> = (0..m).map(|_| random_record(rng, None)).collect();
    let mut client: Vec<TrailRecord> = (0..overlap.min(m)).map(|_| server[rng.gen_range(0..m)].clone()).collect();
    while client.len() < n {
        client.push(random_record(rng, None));
    }
    (server, client)
}

pub fn write_ndjson(path: &Path, records: &[TrailRecord]) {
    let mut f = std::io::BufWriter::new(fs::File::create(path).unwrap());
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r).unwrap()).unwrap();
    }
}

/// Intersection computed from the plaintext trails alone.
pub fn file_oracle(server: &[TrailRecord], client: &[TrailRecord], params: &EncodingParams) -> BTreeSet<ElementDigest> {
    let stored: BTreeSet<ElementDigest> = server.iter().map(|r| point_digest(&r.point(), params).unwrap()).collect();
    client
        .iter()
        .flat_map(|r| expand_window(&r.point(), params).unwrap())
        .map(|(_, d)| d)
        .filter(|d| stored.contains(d))
        .collect()
}
