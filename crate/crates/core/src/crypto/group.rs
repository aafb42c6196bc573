//! Quadratic-residue subgroup of Z_p* for a safe prime p = 2q + 1.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::arith::{is_probable_prime, jacobi, mod_exp, random_safe_prime};
use super::CryptoError;
use crate::encoding::{hash_truncated, ElementDigest};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DhGroup {
    pub p: BigUint,
    pub q: BigUint,
    pub g: BigUint,
}

impl DhGroup {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(bits: u64, rng: &mut R) -> Result<Self, CryptoError> {
        let (p, q) = random_safe_prime(bits, rng)?;
        Ok(DhGroup { p, q, g: BigUint::from(4u8) })
    }

    /// Group for a known safe prime. Primality of p and q is not rechecked.
    pub fn from_safe_prime(p: BigUint) -> Result<Self, CryptoError> {
        if p < BigUint::from(7u8) || (&p % 2u8).is_zero() {
            return Err(CryptoError::Parameter("safe prime must be odd and at least 7".into()));
        }
        let q = (&p - 1u8) >> 1;
        Ok(DhGroup { p, q, g: BigUint::from(4u8) })
    }

    /// Nonzero quadratic residues mod p are exactly the order-q subgroup.
    pub fn is_member(&self, x: &BigUint) -> bool {
        !x.is_zero() && *x < self.p && jacobi(x, &self.p) == 1
    }

    pub fn exp(&self, x: &BigUint, k: &BigUint) -> BigUint {
        mod_exp(x, k, &self.p).expect("p > 0")
    }

    pub fn byte_len(&self) -> usize {
        self.p.bits().div_ceil(8) as usize
    }
}

/// `(int(d) mod p)^2 mod p`. A digest that reduces to zero is re-hashed with
/// a 4-byte big-endian counter appended until it does not.
pub fn hash_to_group(d: &ElementDigest, group: &DhGroup) -> BigUint {
    let mut v = BigUint::from_bytes_be(d.as_bytes()) % &group.p;
    let mut counter: u32 = 0;
    while v.is_zero() {
        counter += 1;
        let rehashed = hash_truncated(&[d.as_bytes(), &counter.to_be_bytes()], 32);
        v = BigUint::from_bytes_be(rehashed.as_bytes()) % &group.p;
    }
    &v * &v % &group.p
}

/// Secret exponents are drawn from `[1, 2^SHORT_EXPONENT_BITS)` when the
/// subgroup order is larger than that.
pub const SHORT_EXPONENT_BITS: u64 = 256;

const MODP_1024: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7EDEE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF";

const MODP_2048: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7EDEE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3BE39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF6955817183995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

impl DhGroup {
    /// The 1024-bit MODP safe prime of RFC 2409 (Oakley group 2).
    pub fn modp1024() -> Self {
        Self::from_hex(MODP_1024)
    }

    /// The 2048-bit MODP safe prime of RFC 3526 (group 14).
    pub fn modp2048() -> Self {
        Self::from_hex(MODP_2048)
    }

    fn from_hex(hex: &str) -> Self {
        let p = BigUint::parse_bytes(hex.as_bytes(), 16).expect("valid hex constant");
        Self::from_safe_prime(p).expect("odd constant")
    }

    /// Full check of parameters received from a peer: p and q prime and g
    /// the fixed generator.
    pub fn validate<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> Result<(), CryptoError> {
        if self.g != BigUint::from(4u8) || self.q != (&self.p - 1u8) >> 1 {
            return Err(CryptoError::Parameter("unexpected generator or subgroup order".into()));
        }
        if !is_probable_prime(&self.p, rng) || !is_probable_prime(&self.q, rng) {
            return Err(CryptoError::Parameter("modulus is not a safe prime".into()));
        }
        Ok(())
    }

    /// A secret exponent, shortened to `SHORT_EXPONENT_BITS` for large groups.
    pub fn random_exponent<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        let bound = if self.q.bits() > SHORT_EXPONENT_BITS { BigUint::one() << SHORT_EXPONENT_BITS } else { self.q.clone() };
        rng.gen_biguint_range(&BigUint::one(), &bound)
    }

    pub fn euler_check(&self, x: &BigUint) -> bool {
        mod_exp(x, &self.q, &self.p).map(|r| r.is_one()).unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn toy_group_mapping() {
        let g = DhGroup::from_safe_prime(BigUint::from(23u8)).unwrap();
        assert_eq!(g.q, BigUint::from(11u8));
        let h = hash_to_group(&ElementDigest::from_bytes(vec![5]), &g);
        assert_eq!(h, BigUint::from(2u8));
        let h0 = hash_to_group(&ElementDigest::from_bytes(vec![23]), &g);
        assert!(g.is_member(&h0));
    }

    #[test]
    fn outputs_are_quadratic_residues() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let group = DhGroup::generate(128, &mut rng).unwrap();
        for _ in 0..1000 {
            let mut bytes = [0u8; 32];
            rng.fill_bytes(&mut bytes);
            let d = ElementDigest::from_bytes(bytes.to_vec());
            let h = hash_to_group(&d, &group);
            assert!(group.euler_check(&h));
            assert!(group.is_member(&h));
            assert_eq!(h, hash_to_group(&d, &group));
        }
    }

    #[test]
    fn standard_groups_are_safe_primes() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        for (g, bits) in [(DhGroup::modp1024(), 1024), (DhGroup::modp2048(), 2048)] {
            assert_eq!(g.p.bits(), bits);
            g.validate(&mut rng).unwrap();
            assert!(g.random_exponent(&mut rng).bits() <= SHORT_EXPONENT_BITS);
        }
        let mut bad = DhGroup::modp1024();
        bad.p += 2u8;
        bad.q = (&bad.p - 1u8) >> 1;
        assert!(bad.validate(&mut rng).is_err());
    }

    #[test]
    fn membership_agrees_with_euler_criterion() {
        let g = DhGroup::from_safe_prime(BigUint::from(107u8)).unwrap();
        for x in 1..107u32 {
            let x = BigUint::from(x);
            assert_eq!(g.is_member(&x), g.euler_check(&x));
        }
        assert!(!g.is_member(&BigUint::zero()));
        assert!(!g.is_member(&BigUint::from(107u8)));
    }
}
