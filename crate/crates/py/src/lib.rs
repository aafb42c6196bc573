//! Python bindings (`import pytrailpsi`).
//!
//! Digests are `bytes`, big integers are Python `int`s, reports are dicts.

use std::sync::Arc;

use num_bigint::BigUint;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use trailpsi::cost::{self, CostParams, CostScheme, OutputFormat, Preset};
use trailpsi::crypto::{self, DhGroup, PaillierCiphertext, RsaKeyPair};
use trailpsi::encoding::{self, ElementDigest, EncodingParams, TrailPoint};
use trailpsi::net;
use trailpsi::protocol::{self, PsiConfig, SchemeId};
use trailpsi::sketch;

create_exception!(pytrailpsi, TrailPsiError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    TrailPsiError::new_err(e.to_string())
}

fn params(bucket_seconds: u64, window: u32, beta_bits: u32) -> PyResult<EncodingParams> {
    let p = EncodingParams { time_bucket_s: bucket_seconds, window_buckets: window, beta_bits, ..EncodingParams::default() };
    p.validate().map_err(err)?;
    Ok(p)
}

fn to_digests(items: Vec<Vec<u8>>) -> Vec<ElementDigest> {
    items.into_iter().map(ElementDigest::from_bytes).collect()
}

fn scheme(name: &str) -> PyResult<SchemeId> {
    SchemeId::from_name(name).ok_or_else(|| err(format!("unknown scheme '{name}'")))
}

/// Digest of one trail point in its own time bucket.
#[pyfunction]
#[pyo3(signature = (lat, lon, t, bucket_seconds=3600, beta_bits=256))]
fn digest_point(lat: f64, lon: f64, t: u64, bucket_seconds: u64, beta_bits: u32) -> PyResult<Vec<u8>> {
    let p = params(bucket_seconds, 1, beta_bits)?;
    let point = TrailPoint::from_degrees(lat, lon, t).map_err(err)?;
    Ok(encoding::point_digest(&point, &p).map_err(err)?.as_bytes().to_vec())
}

/// `(bucket, digest)` pairs for the window around a point.
#[pyfunction]
#[pyo3(signature = (lat, lon, t, bucket_seconds=3600, window=3, beta_bits=256))]
fn expand_window(lat: f64, lon: f64, t: u64, bucket_seconds: u64, window: u32, beta_bits: u32) -> PyResult<Vec<(u64, Vec<u8>)>> {
    let p = params(bucket_seconds, window, beta_bits)?;
    let point = TrailPoint::from_degrees(lat, lon, t).map_err(err)?;
    Ok(encoding::expand_window(&point, &p).map_err(err)?.into_iter().map(|(b, d)| (b, d.as_bytes().to_vec())).collect())
}

/// Runs one scheme in memory between a server set and a client set with
/// freshly generated keys and returns the client's view of the
/// intersection, sorted.
#[pyfunction]
#[pyo3(signature = (scheme_name, server, client, key_bits=512, fnp_bins=1))]
fn intersect(
    py: Python<'_>,
    scheme_name: &str,
    server: Vec<Vec<u8>>,
    client: Vec<Vec<u8>>,
    key_bits: u64,
    fnp_bins: usize,
) -> PyResult<Vec<Vec<u8>>> {
    let scheme = scheme(scheme_name)?;
    let (x, y) = (to_digests(server), to_digests(client));
    let digest_len = x.iter().chain(&y).map(ElementDigest::len).next().unwrap_or(32);
    py.detach(|| {
        let mut rng = rand::thread_rng();
        let mut config = PsiConfig { digest_len, fnp_bins, ..PsiConfig::default() };
        match scheme {
            SchemeId::DiffieHellman => config.group = Some(DhGroup::modp1024()),
            SchemeId::BlindRsa => {
                config.rsa = Some(Arc::new(RsaKeyPair::generate(key_bits / 2, &BigUint::from(65537u32), &mut rng).map_err(err)?))
            }
            SchemeId::PaillierPolynomial => {
                config.paillier = Some(Arc::new(crypto::PaillierKeyPair::generate(key_bits / 2, &mut rng).map_err(err)?))
            }
            SchemeId::NaivePull | SchemeId::NaivePush => {}
        }
        let (_, result) = protocol::run_psi(scheme, &x, &y, &config, &mut rng).map_err(err)?;
        Ok(result.matched.into_iter().map(|d| d.as_bytes().to_vec()).collect())
    })
}

/// Plain set intersection, the reference every scheme must reproduce.
#[pyfunction]
fn plaintext_intersection(server: Vec<Vec<u8>>, client: Vec<Vec<u8>>) -> Vec<Vec<u8>> {
    protocol::plaintext_intersection(&to_digests(server), &to_digests(client))
        .matched
        .into_iter()
        .map(|d| d.as_bytes().to_vec())
        .collect()
}

/// Queries a running server with `(lat, lon, t)` points; returns the risk
/// report as a dict.
#[pyfunction]
#[pyo3(signature = (addr, scheme_name, points, town="default", bucket_seconds=3600, window=3, beta_bits=256, paillier_bits=512))]
#[allow(clippy::too_many_arguments)]
fn query<'py>(
    py: Python<'py>,
    addr: &str,
    scheme_name: &str,
    points: Vec<(f64, f64, u64)>,
    town: &str,
    bucket_seconds: u64,
    window: u32,
    beta_bits: u32,
    paillier_bits: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = net::QueryConfig::new(scheme(scheme_name)?, town);
    cfg.params = params(bucket_seconds, window, beta_bits)?;
    cfg.paillier_bits = paillier_bits;
    let pts = points
        .into_iter()
        .map(|(lat, lon, t)| TrailPoint::from_degrees(lat, lon, t))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let report = py.detach(|| net::query(addr, &pts, &cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("match_count", report.match_count)?;
    d.set_item("score", report.score)?;
    let buckets: Vec<(u64, u64)> = report.matched_buckets.iter().map(|b| (b.bucket, b.count)).collect();
    d.set_item("matched_buckets", buckets)?;
    Ok(d)
}

/// Cost-model row for one scheme as a dict. A preset supplies the starting
/// parameters; keyword overrides replace individual fields.
#[pyfunction]
#[pyo3(signature = (scheme_name, preset=None, m=None, n=None, alpha=None, beta=None, tau=None, server_hz=None, client_hz=None))]
#[allow(clippy::too_many_arguments)]
fn estimate<'py>(
    py: Python<'py>,
    scheme_name: &str,
    preset: Option<&str>,
    m: Option<f64>,
    n: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    tau: Option<f64>,
    server_hz: Option<f64>,
    client_hz: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = CostScheme::from_name(scheme_name).map_err(err)?;
    let mut p = match preset {
        None => CostParams::default(),
        Some(name) => Preset::from_name(name).map_err(err)?.params(s),
    };
    for (field, v) in [
        (&mut p.m, m),
        (&mut p.n, n),
        (&mut p.alpha, alpha),
        (&mut p.beta, beta),
        (&mut p.tau, tau),
        (&mut p.server_hz, server_hz),
        (&mut p.client_hz, client_hz),
    ] {
        if let Some(v) = v {
            *field = v;
        }
    }
    p.validate().map_err(err)?;
    let row = cost::scheme_cost(s, &p);
    let d = PyDict::new(py);
    d.set_item("scheme", s.name())?;
    d.set_item("server_ops", row.server_ops)?;
    d.set_item("client_ops", row.client_ops)?;
    d.set_item("server_seconds", row.server_seconds)?;
    d.set_item("client_seconds", row.client_seconds)?;
    d.set_item("server_bits", row.server_bits.render())?;
    d.set_item("client_bits", row.client_bits.render())?;
    Ok(d)
}

/// The five-row table for a preset, as text (`"table"`) or CSV.
#[pyfunction]
#[pyo3(signature = (preset, format="table"))]
fn estimate_table(preset: &str, format: &str) -> PyResult<String> {
    let preset = Preset::from_name(preset).map_err(err)?;
    let format = match format {
        "table" => OutputFormat::Table,
        "csv" => OutputFormat::Csv,
        other => return Err(err(format!("unknown format '{other}'"))),
    };
    let rows: Vec<_> = CostScheme::TABLE.iter().map(|&s| cost::scheme_cost(s, &preset.params(s))).collect();
    Ok(cost::render_scenario(&rows, format))
}

#[pyclass(module = "pytrailpsi")]
struct BloomFilter(sketch::BloomFilter);

#[pymethods]
impl BloomFilter {
    #[new]
    fn new(num_bits: usize, num_hashes: u32) -> PyResult<Self> {
        sketch::BloomFilter::new(num_bits, num_hashes).map(BloomFilter).map_err(err)
    }

    #[staticmethod]
    fn with_target_fpr(expected: usize, target: f64) -> PyResult<Self> {
        sketch::BloomFilter::with_target_fpr(expected, target).map(BloomFilter).map_err(err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        sketch::BloomFilter::from_bytes(data).map(BloomFilter).map_err(err)
    }

    fn insert(&mut self, item: Vec<u8>) {
        self.0.insert(&ElementDigest::from_bytes(item));
    }

    fn __contains__(&self, item: Vec<u8>) -> bool {
        self.0.contains(&ElementDigest::from_bytes(item))
    }

    fn estimated_fpr(&self) -> f64 {
        self.0.estimated_fpr()
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes()
    }

    #[getter]
    fn num_bits(&self) -> usize {
        self.0.num_bits()
    }

    #[getter]
    fn num_hashes(&self) -> u32 {
        self.0.num_hashes()
    }
}

#[pyclass(module = "pytrailpsi")]
struct CountMinSketch(sketch::CountMinSketch);

#[pymethods]
impl CountMinSketch {
    #[new]
    #[pyo3(signature = (epsilon, delta, key=0))]
    fn new(epsilon: f64, delta: f64, key: u64) -> PyResult<Self> {
        sketch::CountMinSketch::new(epsilon, delta, key).map(CountMinSketch).map_err(err)
    }

    #[pyo3(signature = (item, count=1))]
    fn update(&mut self, item: Vec<u8>, count: u64) -> PyResult<()> {
        self.0.update(&ElementDigest::from_bytes(item), count).map_err(err)
    }

    fn query(&self, item: Vec<u8>) -> u64 {
        self.0.query(&ElementDigest::from_bytes(item))
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }
}

#[pyclass(module = "pytrailpsi")]
struct CuckooTable(sketch::CuckooTable);

#[pymethods]
impl CuckooTable {
    #[new]
    #[pyo3(signature = (expected, load=0.9, num_hashes=3, seed=0))]
    fn new(expected: usize, load: f64, num_hashes: usize, seed: u64) -> PyResult<Self> {
        sketch::CuckooTable::for_load(expected, load, num_hashes, seed).map(CuckooTable).map_err(err)
    }

    fn insert(&mut self, item: Vec<u8>) -> PyResult<()> {
        self.0.insert(ElementDigest::from_bytes(item)).map(|_| ()).map_err(err)
    }

    fn __contains__(&self, item: Vec<u8>) -> bool {
        self.0.contains(&ElementDigest::from_bytes(item))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Paillier key pair over Python integers.
#[pyclass(module = "pytrailpsi")]
struct PaillierKeyPair(crypto::PaillierKeyPair);

#[pymethods]
impl PaillierKeyPair {
    #[new]
    #[pyo3(signature = (bits=1024))]
    fn new(py: Python<'_>, bits: u64) -> PyResult<Self> {
        py.detach(|| crypto::PaillierKeyPair::generate(bits / 2, &mut rand::thread_rng()))
            .map(PaillierKeyPair)
            .map_err(err)
    }

    #[staticmethod]
    fn from_primes(p: BigUint, q: BigUint) -> PyResult<Self> {
        crypto::PaillierKeyPair::from_primes(&p, &q).map(PaillierKeyPair).map_err(err)
    }

    #[getter]
    fn modulus(&self) -> BigUint {
        self.0.public.modulus().clone()
    }

    #[pyo3(signature = (m, r=None))]
    fn encrypt(&self, m: BigUint, r: Option<BigUint>) -> PyResult<BigUint> {
        self.0.public.encrypt(&m, r.as_ref(), &mut rand::thread_rng()).map(|c| c.into_value()).map_err(err)
    }

    fn decrypt(&self, c: BigUint) -> PyResult<BigUint> {
        self.0.decrypt(&PaillierCiphertext::from_value(c)).map_err(err)
    }

    fn add(&self, c1: BigUint, c2: BigUint) -> BigUint {
        self.0.public.add(&PaillierCiphertext::from_value(c1), &PaillierCiphertext::from_value(c2)).into_value()
    }

    fn scalar_mul(&self, c: BigUint, k: BigUint) -> BigUint {
        self.0.public.scalar_mul(&PaillierCiphertext::from_value(c), &k).into_value()
    }
}

#[pymodule]
fn pytrailpsi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TrailPsiError", m.py().get_type::<TrailPsiError>())?;
    m.add("SCHEMES", SchemeId::ALL.iter().map(|s| s.name()).collect::<Vec<_>>())?;
    m.add_function(wrap_pyfunction!(digest_point, m)?)?;
    m.add_function(wrap_pyfunction!(expand_window, m)?)?;
    m.add_function(wrap_pyfunction!(intersect, m)?)?;
    m.add_function(wrap_pyfunction!(plaintext_intersection, m)?)?;
    m.add_function(wrap_pyfunction!(query, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_table, m)?)?;
    m.add_class::<BloomFilter>()?;
    m.add_class::<CountMinSketch>()?;
    m.add_class::<CuckooTable>()?;
    m.add_class::<PaillierKeyPair>()?;
    Ok(())
}
