//! Number-theoretic building blocks: modular arithmetic, Paillier, RSA,
//! polynomials over Z_n and prime-order groups for Diffie-Hellman.
//!
//! Nothing here is constant time. The protocols assume semi-honest parties.

pub mod arith;
pub mod group;
pub mod keyfile;
pub mod paillier;
pub mod poly;
pub mod rsa;

use thiserror::Error;

pub use arith::mod_exp;
pub use group::{hash_to_group, DhGroup};
pub use keyfile::KeyFile;
pub use paillier::{PaillierCiphertext, PaillierKeyPair, PaillierPrivateKey, PaillierPublicKey};
pub use poly::Polynomial;
pub use rsa::{RsaKeyPair, RsaPublicKey};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("key generation failed: {0}")]
    KeyGeneration(String),
    #[error("decryption failed: {0}")]
    Decryption(String),
    #[error("key file: {0}")]
    Format(String),
}
