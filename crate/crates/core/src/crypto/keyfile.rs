//! Plain-text key files.
//!
//! ```text
//! trailpsi-key <kind>
//! <field> <decimal integer>
//! ...
//! ```
//!
//! Kinds and their fields, in order:
//! `rsa-private` (n, e, d, p, q), `rsa-public` (n, e),
//! `paillier-private` (u, g, lambda, mu), `paillier-public` (u, g),
//! `dh-group` (p, q, g). Unknown fields are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigUint;

use super::{CryptoError, DhGroup, PaillierKeyPair, PaillierPublicKey, RsaKeyPair, RsaPublicKey};

const HEADER: &str = "trailpsi-key";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KeyFile {
    RsaPrivate(RsaKeyPair),
    RsaPublic(RsaPublicKey),
    PaillierPrivate(PaillierKeyPair),
    PaillierPublic(PaillierPublicKey),
    DhGroup(DhGroup),
}

impl KeyFile {
    pub fn kind(&self) -> &'static str {
        match self {
            KeyFile::RsaPrivate(_) => "rsa-private",
            KeyFile::RsaPublic(_) => "rsa-public",
            KeyFile::PaillierPrivate(_) => "paillier-private",
            KeyFile::PaillierPublic(_) => "paillier-public",
            KeyFile::DhGroup(_) => "dh-group",
        }
    }

    fn fields(&self) -> Vec<(&'static str, &BigUint)> {
        match self {
            KeyFile::RsaPrivate(k) => vec![("n", &k.n), ("e", &k.e), ("d", &k.d), ("p", &k.p), ("q", &k.q)],
            KeyFile::RsaPublic(k) => vec![("n", &k.n), ("e", &k.e)],
            KeyFile::PaillierPrivate(k) => vec![
                ("u", k.public.modulus()),
                ("g", k.public.generator()),
                ("lambda", k.lambda()),
                ("mu", k.mu()),
            ],
            KeyFile::PaillierPublic(k) => vec![("u", k.modulus()), ("g", k.generator())],
            KeyFile::DhGroup(g) => vec![("p", &g.p), ("q", &g.q), ("g", &g.g)],
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER} {}\n", self.kind());
        for (name, value) in self.fields() {
            writeln!(out, "{name} {value}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CryptoError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| fmt_err("empty key file"))?;
        let kind = header
            .strip_prefix(HEADER)
            .map(str::trim)
            .ok_or_else(|| fmt_err(format!("missing '{HEADER}' header")))?;
        let mut fields = BTreeMap::new();
        for line in lines {
            let (name, value) =
                line.split_once(' ').ok_or_else(|| fmt_err(format!("malformed line {line:?}")))?;
            let value = BigUint::parse_bytes(value.trim().as_bytes(), 10)
                .ok_or_else(|| fmt_err(format!("field {name} is not a decimal integer")))?;
            if fields.insert(name.to_string(), value).is_some() {
                return Err(fmt_err(format!("duplicate field {name}")));
            }
        }
        let mut take = |name: &str| fields.remove(name).ok_or_else(|| fmt_err(format!("missing field {name}")));
        let key = match kind {
            "rsa-private" => {
                let (n, e, d, p, q) = (take("n")?, take("e")?, take("d")?, take("p")?, take("q")?);
                let kp = RsaKeyPair::from_primes(&p, &q, &e)?;
                if kp.n != n || (&kp.d % kp.carmichael()) != (&d % kp.carmichael()) {
                    return Err(fmt_err("RSA fields are inconsistent"));
                }
                KeyFile::RsaPrivate(kp)
            }
            "rsa-public" => KeyFile::RsaPublic(RsaPublicKey { n: take("n")?, e: take("e")? }),
            "paillier-private" => {
                let pk = paillier_public(take("u")?, take("g")?)?;
                KeyFile::PaillierPrivate(PaillierKeyPair::from_parts(pk, take("lambda")?, take("mu")?))
            }
            "paillier-public" => KeyFile::PaillierPublic(paillier_public(take("u")?, take("g")?)?),
            "dh-group" => {
                let group = DhGroup::from_safe_prime(take("p")?)?;
                let (q, g) = (take("q")?, take("g")?);
                if q != group.q || !group.is_member(&g) {
                    return Err(fmt_err("dh-group fields are inconsistent"));
                }
                KeyFile::DhGroup(DhGroup { g, ..group })
            }
            other => return Err(fmt_err(format!("unknown key kind {other:?}"))),
        };
        if let Some(extra) = fields.keys().next() {
            return Err(fmt_err(format!("unexpected field {extra}")));
        }
        Ok(key)
    }
}

fn paillier_public(u: BigUint, g: BigUint) -> Result<PaillierPublicKey, CryptoError> {
    let pk = PaillierPublicKey::from_modulus(u)?;
    if *pk.generator() != g {
        return Err(fmt_err("only the generator g = u + 1 is supported"));
    }
    Ok(pk)
}

fn fmt_err(msg: impl Into<String>) -> CryptoError {
    CryptoError::Format(msg.into())
}
