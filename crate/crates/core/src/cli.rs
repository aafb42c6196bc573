//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 1 when the operation itself fails, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::{BigUint, RandBigInt};
use serde::Serialize;

use crate::cost::{self, CostParams, CostScheme, OutputFormat, Preset};
use crate::crypto::{self, DhGroup, KeyFile, PaillierKeyPair, RsaKeyPair};
use crate::encoding::{EncodingParams, TrailPoint};
use crate::net::{self, QueryConfig, Server, ServerFileConfig};
use crate::protocol::{self, PsiConfig, SchemeId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "trailpsi", version, about = "Private set intersection for location trails")]
#[command(subcommand_required = true, arg_required_else_help = true)]
struct Cli {
    /// Configuration file for `serve`.
    #[arg(long, global = true, env = "PSI_CONFIG")]
    config: Option<PathBuf>,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an RSA key, a Paillier key or a DH group.
    Keygen(KeygenArgs),
    /// Add an NDJSON trail file to a store directory.
    Ingest(IngestArgs),
    /// Serve a store over TCP until interrupted.
    Serve(ServeArgs),
    /// Query a server with a trail file and print the risk report as JSON.
    Query(QueryArgs),
    /// Evaluate the analytic cost model.
    Estimate(EstimateArgs),
    /// Time primitives and small in-memory PSI runs.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KeyKind {
    Rsa,
    Paillier,
    Dh,
}

#[derive(Debug, Args)]
struct KeygenArgs {
    #[arg(long, value_enum)]
    kind: KeyKind,
    /// Modulus size in bits.
    #[arg(long, default_value_t = 1024)]
    bits: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the public half (RSA and Paillier).
    #[arg(long)]
    public_out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct EncodingArgs {
    /// Time bucket width in seconds.
    #[arg(long, default_value_t = 3600)]
    bucket_seconds: u64,
    /// Buckets per client point (odd).
    #[arg(long, default_value_t = 3)]
    window: u32,
    /// Digest size in bits.
    #[arg(long, default_value_t = 256)]
    beta_bits: u32,
}

impl EncodingArgs {
    fn params(&self) -> EncodingParams {
        EncodingParams {
            time_bucket_s: self.bucket_seconds,
            window_buckets: self.window,
            beta_bits: self.beta_bits,
            ..EncodingParams::default()
        }
    }
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    encoding: EncodingArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Store directory; overrides the config file.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, env = "PSI_LISTEN")]
    listen: Option<String>,
    /// rsa-private key file enabling Blind RSA.
    #[arg(long)]
    rsa_key: Option<PathBuf>,
    /// modp1024, modp2048 or a dh-group key file, enabling DH.
    #[arg(long)]
    dh_group: Option<String>,
    /// Comma-separated scheme names to enable.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long)]
    max_client_elements: Option<usize>,
    #[arg(long)]
    min_paillier_bits: Option<u64>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    server: String,
    /// NDJSON trail file of the querying user.
    #[arg(long)]
    trail: PathBuf,
    /// naive-pull, naive-push, dh, blind-rsa or paillier.
    #[arg(long)]
    scheme: String,
    #[arg(long, default_value = net::DEFAULT_TOWN)]
    town: String,
    /// paillier-private key file; a fresh key is generated otherwise.
    #[arg(long)]
    paillier_key: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    paillier_bits: u64,
    /// Polynomial bins; defaults to one per client element.
    #[arg(long)]
    fnp_bins: Option<usize>,
    #[command(flatten)]
    encoding: EncodingArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    India,
    Sparse,
}

/// Accepts plain numbers, scientific notation and powers such as `2^30`.
fn parse_quantity(s: &str) -> Result<f64, String> {
    let v = match s.split_once('^') {
        Some((base, exp)) => {
            let b: f64 = base.trim().parse().map_err(|_| format!("bad base in '{s}'"))?;
            let e: i32 = exp.trim().parse().map_err(|_| format!("bad exponent in '{s}'"))?;
            b.powi(e)
        }
        None => s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?,
    };
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("'{s}' must be positive"))
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Scheme rows to show (repeatable); default: the five PSI schemes.
    #[arg(long)]
    scheme: Vec<String>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    #[arg(long, value_parser = parse_quantity)]
    m: Option<f64>,
    #[arg(long, value_parser = parse_quantity)]
    n: Option<f64>,
    #[arg(long, value_parser = parse_quantity)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_quantity)]
    beta: Option<f64>,
    #[arg(long, value_parser = parse_quantity)]
    tau: Option<f64>,
    #[arg(long, value_parser = parse_quantity)]
    sigma: Option<f64>,
    #[arg(long, value_parser = parse_quantity)]
    kappa: Option<f64>,
    #[arg(long, value_parser = parse_quantity)]
    server_hz: Option<f64>,
    #[arg(long, value_parser = parse_quantity)]
    client_hz: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Repetitions per primitive.
    #[arg(long, default_value_t = 20)]
    iterations: u32,
    /// Server and client set sizes for the PSI runs.
    #[arg(long, default_value_t = 128)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Modulus size for the asymmetric primitives and schemes.
    #[arg(long, default_value_t = 512)]
    bits: u64,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Net(#[from] net::NetError),
    #[error(transparent)]
    Crypto(#[from] crypto::CryptoError),
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
    #[error(transparent)]
    Cost(#[from] cost::CostError),
    #[error(transparent)]
    Encoding(#[from] crate::encoding::EncodingError),
    #[error("{0}")]
    Io(String),
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() || e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
        Err(e) => {
            let text = e.render().to_string();
            eprintln!("{}", text.lines().next().unwrap_or("error: invalid usage"));
            return EXIT_USAGE;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    let outcome = match cli.command {
        Command::Keygen(a) => keygen(a),
        Command::Ingest(a) => ingest(a),
        Command::Serve(a) => serve(a, cli.config.as_deref()),
        Command::Query(a) => query(a),
        Command::Estimate(a) => estimate(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            EXIT_ERROR
        }
    }
}

fn write_key(path: &Path, key: &KeyFile) -> Result<(), CliError> {
    fs::write(path, key.to_text()).map_err(|e| io_err(path, e))
}

fn keygen(a: KeygenArgs) -> Result<(), CliError> {
    let mut rng = rand::thread_rng();
    if a.bits < 16 {
        return Err(CliError::Usage(format!("--bits {} is too small", a.bits)));
    }
    match a.kind {
        KeyKind::Rsa => {
            let kp = RsaKeyPair::generate(a.bits / 2, &BigUint::from(crypto::rsa::DEFAULT_PUBLIC_EXPONENT), &mut rng)?;
            if let Some(p) = &a.public_out {
                write_key(p, &KeyFile::RsaPublic(kp.public()))?;
            }
            write_key(&a.out, &KeyFile::RsaPrivate(kp))?;
        }
        KeyKind::Paillier => {
            let kp = PaillierKeyPair::generate(a.bits / 2, &mut rng)?;
            if let Some(p) = &a.public_out {
                write_key(p, &KeyFile::PaillierPublic(kp.public.clone()))?;
            }
            write_key(&a.out, &KeyFile::PaillierPrivate(kp))?;
        }
        KeyKind::Dh => {
            if a.public_out.is_some() {
                return Err(CliError::Usage("a DH group has no separate public half".into()));
            }
            write_key(&a.out, &KeyFile::DhGroup(DhGroup::generate(a.bits, &mut rng)?))?;
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let store = net::TrailStore::ingest(&a.input, &a.store, a.encoding.params())?;
    let counts: std::collections::BTreeMap<String, usize> =
        store.manifest().towns.into_iter().map(|(t, e)| (t, e.count)).collect();
    println!("{}", serde_json::to_string(&counts).expect("counts serialize"));
    Ok(())
}

fn serve(a: ServeArgs, config: Option<&Path>) -> Result<(), CliError> {
    let mut file = match config {
        Some(p) => ServerFileConfig::load(p)?,
        None => ServerFileConfig::default(),
    };
    if a.store.is_some() {
        file.store = a.store;
    }
    if a.rsa_key.is_some() {
        file.rsa_key = a.rsa_key;
    }
    if a.dh_group.is_some() {
        file.dh_group = a.dh_group;
    }
    if a.schemes.is_some() {
        file.schemes = a.schemes;
    }
    if a.max_client_elements.is_some() {
        file.max_client_elements = a.max_client_elements;
    }
    if a.min_paillier_bits.is_some() {
        file.min_paillier_bits = a.min_paillier_bits;
    }
    let listen = a.listen.unwrap_or_else(|| file.listen_address());
    let store_dir = file.store.clone().ok_or_else(|| CliError::Usage("no store given (--store or config)".into()))?;
    let store = net::TrailStore::open(&store_dir)?;
    let keys = file.keys()?;
    let config = file.server_config(&keys)?;
    let enabled: Vec<&str> = config.schemes.iter().map(|s| s.name()).collect();
    let server = Server::bind(&listen, store, config.clone(), keys)?;
    let handle = server.shutdown_handle()?;
    ctrlc::set_handler(move || handle.shutdown()).map_err(|e| CliError::Io(format!("signal handler: {e}")))?;
    println!("listening on {} ({})", server.local_addr()?, enabled.join(","));
    let _ = std::io::stdout().flush();
    server.run()?;
    Ok(())
}

fn query(a: QueryArgs) -> Result<(), CliError> {
    let scheme = SchemeId::from_name(&a.scheme).ok_or_else(|| CliError::Usage(format!("unknown scheme '{}'", a.scheme)))?;
    let params = a.encoding.params();
    params.validate()?;
    let records = net::read_trail_records(&a.trail)?;
    let points: Vec<TrailPoint> = records.iter().map(|r| r.point()).collect();
    let mut cfg = QueryConfig::new(scheme, a.town);
    cfg.params = params;
    cfg.paillier_bits = a.paillier_bits;
    cfg.fnp_bins = a.fnp_bins;
    if let Some(path) = &a.paillier_key {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        match KeyFile::from_text(&text)? {
            KeyFile::PaillierPrivate(k) => cfg.paillier = Some(Arc::new(k)),
            other => return Err(CliError::Usage(format!("{}: expected paillier-private, found {}", path.display(), other.kind()))),
        }
    }
    let report = net::query(&a.server, &points, &cfg)?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<(), CliError> {
    let schemes: Vec<CostScheme> = if a.scheme.is_empty() {
        CostScheme::TABLE.to_vec()
    } else if a.scheme.iter().any(|s| s == "all") {
        CostScheme::ALL.to_vec()
    } else {
        a.scheme.iter().map(|s| CostScheme::from_name(s)).collect::<Result<_, _>>().map_err(|e| CliError::Usage(e.to_string()))?
    };
    let preset = a.preset.map(|p| match p {
        PresetArg::India => Preset::India,
        PresetArg::Sparse => Preset::Sparse,
    });
    let mut rows = Vec::with_capacity(schemes.len());
    for s in schemes {
        let mut p = preset.map_or_else(CostParams::default, |pr| pr.params(s));
        let overrides = [
            (&mut p.m, a.m),
            (&mut p.n, a.n),
            (&mut p.alpha, a.alpha),
            (&mut p.beta, a.beta),
            (&mut p.tau, a.tau),
            (&mut p.sigma, a.sigma),
            (&mut p.kappa, a.kappa),
            (&mut p.server_hz, a.server_hz),
            (&mut p.client_hz, a.client_hz),
        ];
        for (field, value) in overrides {
            if let Some(v) = value {
                *field = v;
            }
        }
        p.validate()?;
        rows.push(cost::scheme_cost(s, &p));
    }
    let format = match a.format {
        FormatArg::Table => OutputFormat::Table,
        FormatArg::Csv => OutputFormat::Csv,
    };
    print!("{}", cost::render_scenario(&rows, format));
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    name: String,
    iterations: u32,
    mean_us: f64,
}

fn time<F: FnMut()>(name: impl Into<String>, iterations: u32, mut f: F) -> BenchRow {
    let start = Instant::now();
    for _ in 0..iterations {
        f();
    }
    let total: Duration = start.elapsed();
    BenchRow { name: name.into(), iterations, mean_us: total.as_secs_f64() * 1e6 / f64::from(iterations.max(1)) }
}

fn bench(a: BenchArgs) -> Result<(), CliError> {
    if a.iterations == 0 || a.bits < 128 {
        return Err(CliError::Usage("need --iterations >= 1 and --bits >= 128".into()));
    }
    let mut rng = rand::thread_rng();
    let it = a.iterations;
    let mut rows = Vec::new();

    let modulus = rng.gen_biguint(a.bits) | BigUint::from(1u8);
    let base = rng.gen_biguint_below(&modulus);
    let exp = rng.gen_biguint(a.bits);
    rows.push(time(format!("mod-exp-{}", a.bits), it, || {
        std::hint::black_box(crypto::mod_exp(&base, &exp, &modulus).expect("nonzero modulus"));
    }));
    let digest = crate::encoding::hash_truncated(&[b"0012971600007759460000000000000010"], 32);
    rows.push(time("sha256-digest", it * 100, || {
        std::hint::black_box(crate::encoding::hash_truncated(&[digest.as_bytes()], 32));
    }));

    let rsa = Arc::new(RsaKeyPair::generate(a.bits / 2, &BigUint::from(crypto::rsa::DEFAULT_PUBLIC_EXPONENT), &mut rng)?);
    let msg = rng.gen_biguint_below(&rsa.n);
    rows.push(time(format!("rsa-sign-crt-{}", a.bits), it, || {
        std::hint::black_box(rsa.sign_raw(&msg));
    }));
    let paillier = Arc::new(PaillierKeyPair::generate(a.bits / 2, &mut rng)?);
    let m = rng.gen_biguint_below(paillier.public.modulus());
    let c = paillier.public.encrypt(&m, None, &mut rng)?;
    rows.push(time(format!("paillier-encrypt-{}", a.bits), it, || {
        std::hint::black_box(paillier.public.encrypt(&m, None, &mut rand::thread_rng()).expect("in range"));
    }));
    rows.push(time(format!("paillier-decrypt-{}", a.bits), it, || {
        std::hint::black_box(paillier.decrypt(&c).expect("valid ciphertext"));
    }));

    let group = if a.bits >= 2048 { DhGroup::modp2048() } else { DhGroup::modp1024() };
    let config = PsiConfig { group: Some(group), rsa: Some(rsa), paillier: Some(paillier), ..PsiConfig::default() };
    let digests = |count: usize, rng: &mut rand::rngs::ThreadRng| -> Vec<crate::encoding::ElementDigest> {
        (0..count).map(|_| crate::encoding::ElementDigest::from_bytes(rng.gen_biguint(256).to_bytes_be())).collect()
    };
    let x = digests(a.m, &mut rng);
    let mut y = digests(a.n / 2, &mut rng);
    y.extend(x.iter().take(a.n - a.n / 2).cloned());
    for scheme in SchemeId::ALL {
        let mut failure = None;
        let row = time(format!("psi-{}-m{}-n{}", scheme.name(), a.m, a.n), 1, || {
            if let Err(e) = protocol::run_psi(scheme, &x, &y, &config, &mut rand::thread_rng()) {
                failure = Some(e);
            }
        });
        if let Some(e) = failure {
            return Err(e.into());
        }
        rows.push(row);
    }
    println!("{}", serde_json::to_string_pretty(&rows).expect("rows serialize"));
    Ok(())
}
