//! Server configuration file (TOML). Every key is optional:
//!
//! ```toml
//! listen = "127.0.0.1:7878"       # overridden by PSI_LISTEN
//! store = "store"                 # store directory, relative to the file
//! schemes = ["naive-pull", "dh"]  # default: every scheme with key material
//! max_client_elements = 1024
//! rsa_key = "server.rsa"          # rsa-private key file
//! dh_group = "modp1024"           # modp1024, modp2048 or a dh-group key file
//! min_paillier_bits = 512
//! io_timeout_s = 900
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::server::{ServerConfig, ServerKeys};
use super::NetError;
use crate::crypto::{DhGroup, KeyFile};
use crate::protocol::SchemeId;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";
pub const LISTEN_ENV: &str = "PSI_LISTEN";

#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerFileConfig {
    pub listen: Option<String>,
    pub store: Option<PathBuf>,
    pub schemes: Option<Vec<String>>,
    pub max_client_elements: Option<usize>,
    pub rsa_key: Option<PathBuf>,
    pub dh_group: Option<String>,
    pub min_paillier_bits: Option<u64>,
    pub io_timeout_s: Option<u64>,
}

impl ServerFileConfig {
    /// Reads the file; relative paths inside it are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, NetError> {
        let text = fs::read_to_string(path).map_err(|e| NetError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| NetError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.store, &mut cfg.rsa_key].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(g) = &mut cfg.dh_group {
            if !g.starts_with("modp") && Path::new(g).is_relative() {
                *g = base.join(&*g).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    /// Listen address: the environment, then the file, then the default.
    pub fn listen_address(&self) -> String {
        std::env::var(LISTEN_ENV)
            .ok()
            .filter(|s| !s.is_empty())
            .or_else(|| self.listen.clone())
            .unwrap_or_else(|| DEFAULT_LISTEN.to_string())
    }

    pub fn keys(&self) -> Result<ServerKeys, NetError> {
        let rsa = match &self.rsa_key {
            Some(path) => match read_key(path)? {
                KeyFile::RsaPrivate(k) => Some(Arc::new(k)),
                other => return Err(NetError::Config(format!("{}: expected rsa-private, found {}", path.display(), other.kind()))),
            },
            None => None,
        };
        let group = self.dh_group.as_deref().map(load_group).transpose()?;
        Ok(ServerKeys { rsa, group })
    }

    pub fn server_config(&self, keys: &ServerKeys) -> Result<ServerConfig, NetError> {
        let schemes = match &self.schemes {
            Some(names) => names
                .iter()
                .map(|n| SchemeId::from_name(n).ok_or_else(|| NetError::Config(format!("unknown scheme '{n}'"))))
                .collect::<Result<_, _>>()?,
            None => SchemeId::ALL
                .into_iter()
                .filter(|s| match s {
                    SchemeId::BlindRsa => keys.rsa.is_some(),
                    SchemeId::DiffieHellman => keys.group.is_some(),
                    _ => true,
                })
                .collect(),
        };
        let mut cfg = ServerConfig { schemes, ..ServerConfig::default() };
        if let Some(m) = self.max_client_elements {
            cfg.max_client_elements = m;
        }
        if let Some(b) = self.min_paillier_bits {
            cfg.min_paillier_bits = b;
        }
        if let Some(t) = self.io_timeout_s {
            cfg.io_timeout = Some(Duration::from_secs(t));
        }
        Ok(cfg)
    }
}

fn read_key(path: &Path) -> Result<KeyFile, NetError> {
    let text = fs::read_to_string(path).map_err(|e| NetError::Config(format!("{}: {e}", path.display())))?;
    KeyFile::from_text(&text).map_err(|e| NetError::Config(format!("{}: {e}", path.display())))
}

/// A named standard group or a `dh-group` key file.
pub fn load_group(name_or_path: &str) -> Result<DhGroup, NetError> {
    match name_or_path {
        "modp1024" => Ok(DhGroup::modp1024()),
        "modp2048" => Ok(DhGroup::modp2048()),
        path => match read_key(Path::new(path))? {
            KeyFile::DhGroup(g) => Ok(g),
            other => Err(NetError::Config(format!("{path}: expected dh-group, found {}", other.kind()))),
        },
    }
}
