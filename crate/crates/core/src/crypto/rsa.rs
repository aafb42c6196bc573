//! Textbook RSA for blind signing. No padding: the blind-signature PSI
//! signs hashed set elements directly.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::arith::{lcm, mod_exp, mod_inverse, random_coprime, random_prime, MAX_SAMPLING_RETRIES};
use super::CryptoError;

pub const DEFAULT_PUBLIC_EXPONENT: u32 = 65537;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsaPublicKey {
    pub n: BigUint,
    pub e: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsaKeyPair {
    pub n: BigUint,
    pub e: BigUint,
    pub d: BigUint,
    pub p: BigUint,
    pub q: BigUint,
    dp: BigUint,
    dq: BigUint,
    q_inv: BigUint,
}

impl RsaKeyPair {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(
        prime_bits: u64,
        e: &BigUint,
        rng: &mut R,
    ) -> Result<Self, CryptoError> {
        if prime_bits < 16 {
            return Err(CryptoError::KeyGeneration(format!(
                "prime size {prime_bits} below the 16-bit minimum"
            )));
        }
        for _ in 0..MAX_SAMPLING_RETRIES {
            let p = random_prime(prime_bits, rng)?;
            let q = random_prime(prime_bits, rng)?;
            if p == q {
                continue;
            }
            if let Ok(kp) = Self::from_primes(&p, &q, e) {
                return Ok(kp);
            }
        }
        Err(CryptoError::KeyGeneration(format!(
            "e={e} not coprime to lcm(p-1, q-1) after {MAX_SAMPLING_RETRIES} prime pairs"
        )))
    }

    /// Private exponent is `e^-1 mod lcm(p-1, q-1)`.
    pub fn from_primes(p: &BigUint, q: &BigUint, e: &BigUint) -> Result<Self, CryptoError> {
        let lambda = lcm(&(p - 1u8), &(q - 1u8));
        let d = mod_inverse(e, &lambda)
            .ok_or_else(|| CryptoError::KeyGeneration("e not coprime to lcm(p-1, q-1)".into()))?;
        let q_inv = mod_inverse(q, p)
            .ok_or_else(|| CryptoError::KeyGeneration("p and q not coprime".into()))?;
        Ok(RsaKeyPair {
            n: p * q,
            e: e.clone(),
            dp: &d % (p - 1u8),
            dq: &d % (q - 1u8),
            d,
            p: p.clone(),
            q: q.clone(),
            q_inv,
        })
    }

    pub fn public(&self) -> RsaPublicKey {
        RsaPublicKey { n: self.n.clone(), e: self.e.clone() }
    }

    pub fn carmichael(&self) -> BigUint {
        lcm(&(&self.p - 1u8), &(&self.q - 1u8))
    }

    /// `m^d mod N`, computed with the CRT.
    pub fn sign_raw(&self, m: &BigUint) -> BigUint {
        let m1 = mod_exp(&(m % &self.p), &self.dp, &self.p).expect("p > 0");
        let m2 = mod_exp(&(m % &self.q), &self.dq, &self.q).expect("q > 0");
        let diff = (&m1 + &self.p - (&m2 % &self.p)) % &self.p;
        let h = &self.q_inv * diff % &self.p;
        m2 + h * &self.q
    }
}

impl RsaPublicKey {
    pub fn apply(&self, m: &BigUint) -> BigUint {
        mod_exp(m, &self.e, &self.n).expect("N > 0")
    }

    /// Returns `(m * r^e mod N, r)` for a fresh unit `r`.
    pub fn blind<R: RngCore + CryptoRng + ?Sized>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<(BigUint, BigUint), CryptoError> {
        for _ in 0..MAX_SAMPLING_RETRIES {
            let r = random_coprime(&self.n, rng)?;
            let blinded = m * self.apply(&r) % &self.n;
            if !blinded.is_zero() {
                return Ok((blinded, r));
            }
        }
        Err(CryptoError::Domain("message is zero modulo N".into()))
    }

    /// `s * r^-1 mod N`.
    pub fn unblind(&self, s: &BigUint, r: &BigUint) -> Result<BigUint, CryptoError> {
        if !r.gcd(&self.n).is_one() {
            return Err(CryptoError::Parameter("blinding factor not invertible".into()));
        }
        let r_inv = mod_inverse(r, &self.n).expect("checked coprime");
        Ok(s * r_inv % &self.n)
    }

    pub fn byte_len(&self) -> usize {
        self.n.bits().div_ceil(8) as usize
    }
}

impl RsaKeyPair {
    pub fn is_consistent(&self) -> bool {
        (&self.e * &self.d % self.carmichael()).is_one() && !self.n.is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::RandBigInt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn b(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn classic_toy_key() {
        let kp = RsaKeyPair::from_primes(&b(61), &b(53), &b(17)).unwrap();
        assert_eq!(kp.n, b(3233));
        // lcm(60, 52) = 780; 17 * 413 = 7021 = 9 * 780 + 1
        assert_eq!(kp.d, b(413));
        assert!(kp.is_consistent());
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let m = rng.gen_biguint_below(&kp.n);
            assert_eq!(kp.sign_raw(&kp.public().apply(&m)), m);
            assert_eq!(kp.public().apply(&kp.sign_raw(&m)), m);
        }
        for m in [0u64, 1] {
            assert_eq!(kp.public().apply(&b(m)), b(m));
            assert_eq!(kp.sign_raw(&b(m)), b(m));
        }
    }

    #[test]
    fn totient_inverse_also_works_on_toy_key() {
        // 2753 is the inverse modulo phi(N) = 3120; it differs from the
        // lcm-based exponent but is congruent to it modulo 780.
        assert_eq!(b(2753) % b(780), b(413));
        for m in [2u64, 65, 1000, 3232] {
            let c = b(m).modpow(&b(17), &b(3233));
            assert_eq!(c.modpow(&b(2753), &b(3233)), b(m));
        }
    }

    #[test]
    fn keygen_rejects_bad_exponent() {
        assert!(RsaKeyPair::from_primes(&b(61), &b(53), &b(3)).is_err());
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert!(RsaKeyPair::generate(8, &b(65537), &mut rng).is_err());
        let kp = RsaKeyPair::generate(64, &b(65537), &mut rng).unwrap();
        assert!(kp.is_consistent());
        assert_eq!(kp.n.bits(), 128);
    }

    #[test]
    fn blinding_identity_toy() {
        let kp = RsaKeyPair::from_primes(&b(61), &b(53), &b(17)).unwrap();
        let pk = kp.public();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..100 {
            let m = rng.gen_biguint_range(&b(1), &kp.n);
            let (blinded, r) = pk.blind(&m, &mut rng).unwrap();
            let unblinded = pk.unblind(&kp.sign_raw(&blinded), &r).unwrap();
            assert_eq!(unblinded, m.modpow(&kp.d, &kp.n));
        }
    }
}
