//! Analytic cost model for the PSI schemes.
//!
//! Every asymptotic expression is evaluated with an implied constant of one
//! and logarithms in base two. Operation counts are converted to seconds by
//! dividing by the clock rate of the side doing the work. Hashing and key
//! generation are not charged to the Blind-RSA and Paillier rows.

use std::fmt::Write as _;

use thiserror::Error;

use crate::protocol::SchemeId;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("unknown {what} '{name}'")]
    Unknown { what: &'static str, name: String },
    #[error("parameter {0} must be positive and finite")]
    NonPositive(&'static str),
}

/// Inputs to the scheme formulas. All sizes are in bits, clock rates in
/// instructions per second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostParams {
    pub m: f64,
    pub n: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub server_hz: f64,
    pub client_hz: f64,
    /// `|X ∩ Y|` for the push model's reply size. `None` means `n`.
    pub intersection: Option<f64>,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            m: 2f64.powi(30),
            n: 2f64.powi(10),
            alpha: 2f64.powi(8),
            beta: 2f64.powi(8),
            tau: 2f64.powi(12),
            sigma: 256.0,
            kappa: 128.0,
            server_hz: 1e11,
            client_hz: 1e9,
            intersection: None,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), CostError> {
        let fields = [
            ("m", self.m),
            ("n", self.n),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("tau", self.tau),
            ("sigma", self.sigma),
            ("kappa", self.kappa),
            ("server_hz", self.server_hz),
            ("client_hz", self.client_hz),
            ("intersection", self.intersection.unwrap_or(1.0)),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(CostError::NonPositive(name));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrimitiveKind {
    Hash,
    Add,
    Multiply,
    Divide,
    ModExp,
    Horner,
    Viete,
    PaillierEncrypt,
    PaillierDecrypt,
    HomomorphicAdd,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 10] = [
        PrimitiveKind::Hash,
        PrimitiveKind::Add,
        PrimitiveKind::Multiply,
        PrimitiveKind::Divide,
        PrimitiveKind::ModExp,
        PrimitiveKind::Horner,
        PrimitiveKind::Viete,
        PrimitiveKind::PaillierEncrypt,
        PrimitiveKind::PaillierDecrypt,
        PrimitiveKind::HomomorphicAdd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Hash => "hash",
            PrimitiveKind::Add => "add",
            PrimitiveKind::Multiply => "multiply",
            PrimitiveKind::Divide => "divide",
            PrimitiveKind::ModExp => "mod-exp",
            PrimitiveKind::Horner => "horner",
            PrimitiveKind::Viete => "viete",
            PrimitiveKind::PaillierEncrypt => "paillier-encrypt",
            PrimitiveKind::PaillierDecrypt => "paillier-decrypt",
            PrimitiveKind::HomomorphicAdd => "homomorphic-add",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, CostError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| CostError::Unknown { what: "primitive", name: name.to_string() })
    }
}

/// Operand sizes for a single primitive. Unused fields are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimitiveSizes {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    /// Exponent length for modular exponentiation.
    pub k: f64,
    /// Polynomial degree for Horner and Viète.
    pub gamma: f64,
}

impl Default for PrimitiveSizes {
    fn default() -> Self {
        PrimitiveSizes { alpha: 1.0, beta: 1.0, tau: 1.0, k: 1.0, gamma: 1.0 }
    }
}

pub fn primitive_cost(kind: PrimitiveKind, s: &PrimitiveSizes) -> f64 {
    let a = s.alpha;
    match kind {
        PrimitiveKind::Hash => (a + s.beta) * s.tau,
        PrimitiveKind::Add => a,
        PrimitiveKind::Multiply => a * a,
        PrimitiveKind::Divide => a * a.log2().powi(2),
        PrimitiveKind::ModExp => a * a * s.k,
        PrimitiveKind::Horner => s.gamma * a * (a + 1.0),
        PrimitiveKind::Viete => s.gamma * s.gamma * (a * a + a),
        PrimitiveKind::PaillierEncrypt => 2.0 * a * a * (a + 2.0 * s.beta + 8.0),
        PrimitiveKind::PaillierDecrypt => 4.0 * a * (16.0 * a * a + 4.0 * a + (4.0 * a).log2().powi(2)),
        PrimitiveKind::HomomorphicAdd => 16.0 * a * a,
    }
}

/// Rows of the model: the implemented schemes plus the circuit-based
/// Yao sort-compare-shuffle baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CostScheme {
    NaivePull,
    NaivePush,
    DiffieHellman,
    BlindRsa,
    Paillier,
    YaoScs,
}

impl CostScheme {
    pub const ALL: [CostScheme; 6] = [
        CostScheme::NaivePull,
        CostScheme::NaivePush,
        CostScheme::DiffieHellman,
        CostScheme::BlindRsa,
        CostScheme::Paillier,
        CostScheme::YaoScs,
    ];

    /// The five rows of the published comparison tables.
    pub const TABLE: [CostScheme; 5] = [
        CostScheme::NaivePull,
        CostScheme::NaivePush,
        CostScheme::DiffieHellman,
        CostScheme::BlindRsa,
        CostScheme::Paillier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostScheme::YaoScs => "yao-scs",
            other => other.protocol().expect("protocol scheme").name(),
        }
    }

    pub fn from_name(name: &str) -> Result<Self, CostError> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| CostError::Unknown { what: "scheme", name: name.to_string() })
    }

    pub fn protocol(self) -> Option<SchemeId> {
        match self {
            CostScheme::NaivePull => Some(SchemeId::NaivePull),
            CostScheme::NaivePush => Some(SchemeId::NaivePush),
            CostScheme::DiffieHellman => Some(SchemeId::DiffieHellman),
            CostScheme::BlindRsa => Some(SchemeId::BlindRsa),
            CostScheme::Paillier => Some(SchemeId::PaillierPolynomial),
            CostScheme::YaoScs => None,
        }
    }
}

impl From<SchemeId> for CostScheme {
    fn from(s: SchemeId) -> Self {
        match s {
            SchemeId::NaivePull => CostScheme::NaivePull,
            SchemeId::NaivePush => CostScheme::NaivePush,
            SchemeId::DiffieHellman => CostScheme::DiffieHellman,
            SchemeId::BlindRsa => CostScheme::BlindRsa,
            SchemeId::PaillierPolynomial => CostScheme::Paillier,
        }
    }
}

/// Communication volume. `Constant` is a fixed-size exchange independent of
/// the set sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bits {
    Constant,
    Count(f64),
}

impl Bits {
    pub fn value(self) -> Option<f64> {
        match self {
            Bits::Constant => None,
            Bits::Count(v) => Some(v),
        }
    }

    pub fn log2(self) -> Option<f64> {
        self.value().map(f64::log2)
    }

    /// `O(1)`, `2^k` when exact, otherwise `~2^k` to two decimals.
    pub fn render(self) -> String {
        match self {
            Bits::Constant => "O(1)".to_string(),
            Bits::Count(v) => {
                let l = v.log2();
                if l.fract() == 0.0 {
                    format!("2^{}", l as i64)
                } else {
                    format!("~2^{l:.2}")
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeCost {
    pub scheme: CostScheme,
    pub server_ops: f64,
    pub client_ops: f64,
    pub server_bits: Bits,
    pub client_bits: Bits,
    pub server_seconds: f64,
    pub client_seconds: f64,
}

/// One row of the model. The Yao row charges its whole circuit cost to each
/// side, since the evaluation is symmetric.
pub fn scheme_cost(scheme: CostScheme, p: &CostParams) -> SchemeCost {
    let CostParams { m, n, alpha: a, beta: b, tau: t, sigma, kappa, .. } = *p;
    let (server_ops, client_ops, server_bits, client_bits) = match scheme {
        CostScheme::NaivePull => (m * (a + b) * t, n * (a + b) * t + m * n, Bits::Constant, Bits::Count(m * b)),
        CostScheme::NaivePush => (
            m * (a + b) * t + m * n,
            n * (a + b) * t,
            Bits::Count(p.intersection.unwrap_or(n) * b),
            Bits::Count(n * b),
        ),
        CostScheme::DiffieHellman => (
            t * (m * a * a + n * t * t),
            t * (n * a * a + m * t * t) + m * n,
            Bits::Count((m + n) * t),
            Bits::Count(n * t),
        ),
        CostScheme::BlindRsa => (
            t * (m * a * a + 4.0 * n * t * t),
            n * (a * a * t + 2.0 * a * t + 2.0 * t * (2.0 * t).log2().powi(2) + m),
            Bits::Count(2.0 * t * (m + n)),
            Bits::Count(2.0 * n * t),
        ),
        CostScheme::Paillier => (
            m * (n * (4.0 * t * a + 16.0 * t * t) + 4.0 * a * t + 16.0 * t * t + 2.0 * t * t * (t + (2.0 * a + 8.0))),
            n * n * (a * a + a)
                + n * (2.0 * t * t * (t + 2.0 * a + 8.0))
                + m * (4.0 * t * (16.0 * t * t + 4.0 * t + (4.0 * t).log2().powi(2)))
                + m * n,
            Bits::Count(4.0 * m * t),
            Bits::Count(4.0 * n * t),
        ),
        CostScheme::YaoScs => {
            let ops = 12.0 * m * sigma * m.log2() + 3.0 * m * sigma;
            let bits = Bits::Count(6.0 * m * kappa * sigma * m.log2() + 2.0 * m * kappa * sigma);
            (ops, ops, bits, bits)
        }
    };
    SchemeCost {
        scheme,
        server_ops,
        client_ops,
        server_bits,
        client_bits,
        server_seconds: server_ops / p.server_hz,
        client_seconds: client_ops / p.client_hz,
    }
}

/// Set sizes and clock rates of the two published scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 2^30 server elements.
    India,
    /// 2^20 server elements.
    Sparse,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::India => "india",
            Preset::Sparse => "sparse",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, CostError> {
        match name {
            "india" => Ok(Preset::India),
            "sparse" => Ok(Preset::Sparse),
            _ => Err(CostError::Unknown { what: "preset", name: name.to_string() }),
        }
    }

    /// Scenario parameters for one row, including that row's operand sizes.
    pub fn params(self, scheme: CostScheme) -> CostParams {
        let mut p = CostParams {
            m: match self {
                Preset::India => 2f64.powi(30),
                Preset::Sparse => 2f64.powi(20),
            },
            ..CostParams::default()
        };
        match scheme {
            CostScheme::NaivePull | CostScheme::NaivePush => {
                p.alpha = 2f64.powi(9);
                p.beta = 2f64.powi(8);
                p.tau = 2f64.powi(8);
            }
            CostScheme::BlindRsa => p.beta = 2f64.powi(24),
            CostScheme::DiffieHellman | CostScheme::Paillier | CostScheme::YaoScs => {}
        }
        p
    }
}

/// Formats seconds to four significant figures, truncated rather than
/// rounded (2111.06 and 1099.71 print as 2111 and 1099, as the published
/// tables do): plain decimals between 10^-3 and 10^5, otherwise
/// `d.ddd x 10^e`.
pub fn format_seconds(v: f64) -> String {
    four_figures(v, " x 10^")
}

/// Like [`format_seconds`] but with `e` notation, for CSV consumers.
pub fn csv_seconds(v: f64) -> String {
    four_figures(v, "e")
}

fn four_figures(v: f64, exp_sep: &str) -> String {
    if v <= 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mut exp = v.log10().floor() as i32;
    // the relative nudge keeps values such as 2.0 from truncating to 1.999
    let mut digits = (v / 10f64.powi(exp - 3) * (1.0 + 1e-12)).trunc();
    if digits >= 10_000.0 {
        digits /= 10.0;
        exp += 1;
    } else if digits < 1000.0 {
        digits = (digits * 10.0).trunc();
        exp -= 1;
    }
    let digits = digits as u64;
    if (-3..5).contains(&exp) {
        let scaled = digits as f64 * 10f64.powi(exp - 3);
        let decimals = (3 - exp).max(0) as usize;
        format!("{scaled:.decimals$}")
    } else {
        format!("{}.{:03}{exp_sep}{exp}", digits / 1000, digits % 1000)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
}

pub const CSV_HEADER: &str = "scheme,server_ops,client_ops,server_s,client_s,server_bits,client_bits";

fn csv_bits(b: Bits) -> String {
    match b {
        Bits::Constant => "O(1)".to_string(),
        Bits::Count(v) => format!("{v}"),
    }
}

pub fn render_scenario(rows: &[SchemeCost], format: OutputFormat) -> String {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.scheme.name(),
                    r.server_ops,
                    r.client_ops,
                    csv_seconds(r.server_seconds),
                    csv_seconds(r.client_seconds),
                    csv_bits(r.server_bits),
                    csv_bits(r.client_bits)
                );
            }
        }
        OutputFormat::Table => {
            let header = ["scheme", "server (s)", "client (s)", "server bits", "client bits"];
            let body: Vec<[String; 5]> = rows
                .iter()
                .map(|r| {
                    [
                        r.scheme.name().to_string(),
                        format_seconds(r.server_seconds),
                        format_seconds(r.client_seconds),
                        r.server_bits.render(),
                        r.client_bits.render(),
                    ]
                })
                .collect();
            let mut widths = header.map(str::len);
            for row in &body {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let line = |cells: &[String]| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(widths)
                    .enumerate()
                    .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect();
                padded.join("  ").trim_end().to_string()
            };
            let _ = writeln!(out, "{}", line(&header.map(String::from)));
            let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
            for row in &body {
                let _ = writeln!(out, "{}", line(row));
            }
        }
    }
    out
}
