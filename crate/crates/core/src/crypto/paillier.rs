//! Paillier additively homomorphic encryption with generator g = u + 1.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::arith::{lcm, mod_exp, mod_inverse, random_coprime, random_prime, MAX_SAMPLING_RETRIES};
use super::CryptoError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierPublicKey {
    u: BigUint,
    g: BigUint,
    u_squared: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierPrivateKey {
    lambda: BigUint,
    mu: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierKeyPair {
    pub public: PaillierPublicKey,
    pub private: PaillierPrivateKey,
}

/// A ciphertext in [0, u^2).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PaillierCiphertext(BigUint);

impl PaillierCiphertext {
    pub fn from_value(value: BigUint) -> Self {
        PaillierCiphertext(value)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }
}

impl PaillierPublicKey {
    /// Public key for modulus `u` with the fixed generator `u + 1`.
    pub fn from_modulus(u: BigUint) -> Result<Self, CryptoError> {
        if u < BigUint::from(3u8) {
            return Err(CryptoError::Parameter("Paillier modulus too small".into()));
        }
        let g = &u + 1u8;
        let u_squared = &u * &u;
        Ok(PaillierPublicKey { u, g, u_squared })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.u
    }

    pub fn generator(&self) -> &BigUint {
        &self.g
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.u_squared
    }

    /// `E(s) = g^s r^u mod u^2`. A fresh unit `r` is sampled when none is given.
    pub fn encrypt<R: RngCore + CryptoRng + ?Sized>(
        &self,
        s: &BigUint,
        r: Option<&BigUint>,
        rng: &mut R,
    ) -> Result<PaillierCiphertext, CryptoError> {
        if *s >= self.u {
            return Err(CryptoError::Domain(format!(
                "plaintext must be below the {}-bit modulus",
                self.u.bits()
            )));
        }
        let r = match r {
            Some(r) => {
                if r.is_zero() || !r.gcd(&self.u).is_one() {
                    return Err(CryptoError::Parameter("randomizer not coprime to u".into()));
                }
                r.clone()
            }
            None => random_coprime(&self.u, rng)?,
        };
        // g = u + 1, so g^s = 1 + s*u (mod u^2).
        let g_s = (BigUint::one() + s * &self.u) % &self.u_squared;
        let r_u = mod_exp(&r, &self.u, &self.u_squared)?;
        Ok(PaillierCiphertext(g_s * r_u % &self.u_squared))
    }

    pub fn add(&self, c1: &PaillierCiphertext, c2: &PaillierCiphertext) -> PaillierCiphertext {
        PaillierCiphertext(&c1.0 * &c2.0 % &self.u_squared)
    }

    /// `c^k mod u^2`, which decrypts to `k * D(c) mod u`.
    pub fn scalar_mul(&self, c: &PaillierCiphertext, k: &BigUint) -> PaillierCiphertext {
        PaillierCiphertext(mod_exp(&c.0, k, &self.u_squared).expect("u^2 is nonzero"))
    }

    /// Evaluates an encrypted polynomial at plaintext `x` by Horner's rule.
    /// `enc_coeffs[j]` encrypts the coefficient of `x^j`.
    pub fn eval_polynomial(
        &self,
        enc_coeffs: &[PaillierCiphertext],
        x: &BigUint,
    ) -> Result<PaillierCiphertext, CryptoError> {
        let (leading, rest) = enc_coeffs
            .split_last()
            .ok_or_else(|| CryptoError::Domain("empty coefficient list".into()))?;
        if *x >= self.u {
            return Err(CryptoError::Domain("evaluation point must be below u".into()));
        }
        let mut acc = leading.clone();
        for c in rest.iter().rev() {
            acc = self.add(&self.scalar_mul(&acc, x), c);
        }
        Ok(acc)
    }
}

impl PaillierKeyPair {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(
        prime_bits: u64,
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
            if let Ok(kp) = Self::from_primes(&p, &q) {
                return Ok(kp);
            }
        }
        Err(CryptoError::KeyGeneration("no suitable Paillier primes".into()))
    }

    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<Self, CryptoError> {
        let u = p * q;
        let p1 = p - 1u8;
        let q1 = q - 1u8;
        if !u.gcd(&(&p1 * &q1)).is_one() {
            return Err(CryptoError::KeyGeneration("gcd(pq, (p-1)(q-1)) != 1".into()));
        }
        let public = PaillierPublicKey::from_modulus(u)?;
        let lambda = lcm(&p1, &q1);
        let g_lambda = mod_exp(&public.g, &lambda, &public.u_squared)?;
        let l = l_function(&g_lambda, &public.u);
        let mu = mod_inverse(&l, &public.u)
            .ok_or_else(|| CryptoError::KeyGeneration("L(g^lambda) not invertible".into()))?;
        Ok(PaillierKeyPair { public, private: PaillierPrivateKey { lambda, mu } })
    }

    pub fn from_parts(public: PaillierPublicKey, lambda: BigUint, mu: BigUint) -> Self {
        PaillierKeyPair { public, private: PaillierPrivateKey { lambda, mu } }
    }

    pub fn lambda(&self) -> &BigUint {
        &self.private.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.private.mu
    }

    /// `D(c) = L(c^lambda mod u^2) * mu mod u`.
    pub fn decrypt(&self, c: &PaillierCiphertext) -> Result<BigUint, CryptoError> {
        let pk = &self.public;
        if c.0 >= pk.u_squared || c.0.is_zero() || !c.0.gcd(&pk.u_squared).is_one() {
            return Err(CryptoError::Decryption("ciphertext is not a unit modulo u^2".into()));
        }
        let x = mod_exp(&c.0, &self.private.lambda, &pk.u_squared)?;
        Ok(l_function(&x, &pk.u) * &self.private.mu % &pk.u)
    }
}

fn l_function(theta: &BigUint, u: &BigUint) -> BigUint {
    (theta - 1u8) / u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn b(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn toy() -> PaillierKeyPair {
        PaillierKeyPair::from_primes(&b(5), &b(7)).unwrap()
    }

    #[test]
    fn toy_key_values() {
        let kp = toy();
        assert_eq!(kp.public.modulus(), &b(35));
        assert_eq!(kp.public.generator(), &b(36));
        assert_eq!(kp.lambda(), &b(12));
    }

    #[test]
    fn zero_with_unit_randomizer_is_one() {
        let kp = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let c = kp.public.encrypt(&b(0), Some(&b(1)), &mut rng).unwrap();
        assert_eq!(c.value(), &b(1));
        assert_eq!(kp.decrypt(&c).unwrap(), b(0));
    }

    #[test]
    fn encryption_matches_direct_formula() {
        let kp = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let c = kp.public.encrypt(&b(2), Some(&b(3)), &mut rng).unwrap();
        // 36^2 * 3^35 mod 1225 by repeated multiplication
        let mut expected = 36u64 * 36 % 1225;
        for _ in 0..35 {
            expected = expected * 3 % 1225;
        }
        assert_eq!(c.value(), &b(expected));
        assert_eq!(kp.decrypt(&c).unwrap(), b(2));
    }

    #[test]
    fn errors() {
        let kp = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(kp.public.encrypt(&b(35), None, &mut rng), Err(CryptoError::Domain(_))));
        assert!(matches!(
            kp.public.encrypt(&b(1), Some(&b(7)), &mut rng),
            Err(CryptoError::Parameter(_))
        ));
        let c = kp.public.encrypt(&b(4), None, &mut rng).unwrap();
        let tampered = PaillierCiphertext::from_value(c.value() * 35u8 % 1225u32);
        assert!(matches!(kp.decrypt(&tampered), Err(CryptoError::Decryption(_))));
        assert!(kp.public.eval_polynomial(&[], &b(1)).is_err());
    }

    #[test]
    fn toy_homomorphisms() {
        let kp = toy();
        let pk = &kp.public;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let e = |s: u64, rng: &mut ChaCha20Rng| pk.encrypt(&b(s), None, rng).unwrap();
        let (c2, c3, c34) = (e(2, &mut rng), e(3, &mut rng), e(34, &mut rng));
        assert_eq!(kp.decrypt(&pk.add(&c2, &c3)).unwrap(), b(5));
        assert_eq!(kp.decrypt(&pk.add(&c34, &c2)).unwrap(), b(1));
        let zero = e(0, &mut rng);
        assert_eq!(kp.decrypt(&pk.add(&c3, &zero)).unwrap(), b(3));
        assert_eq!(kp.decrypt(&pk.scalar_mul(&c3, &b(4))).unwrap(), b(12));
        assert_eq!(kp.decrypt(&pk.scalar_mul(&c3, &b(1))).unwrap(), b(3));
        assert_eq!(kp.decrypt(&pk.scalar_mul(&c3, &b(0))).unwrap(), b(0));
    }

    #[test]
    fn fresh_randomness_differs() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let kp = PaillierKeyPair::generate(64, &mut rng).unwrap();
        for _ in 0..100 {
            let s = b(rng.gen_range(0..1_000_000));
            let c1 = kp.public.encrypt(&s, None, &mut rng).unwrap();
            let c2 = kp.public.encrypt(&s, None, &mut rng).unwrap();
            assert_ne!(c1, c2);
        }
    }

    #[test]
    fn round_trip_at_128_bit_primes() {
        use num_bigint::RandBigInt;
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let kp = PaillierKeyPair::generate(128, &mut rng).unwrap();
        assert_eq!(kp.public.modulus().bits(), 256);
        for _ in 0..1000 {
            let s = rng.gen_biguint_below(kp.public.modulus());
            let c = kp.public.encrypt(&s, None, &mut rng).unwrap();
            assert_eq!(kp.decrypt(&c).unwrap(), s);
        }
    }

    #[test]
    fn encrypted_horner_degree_zero() {
        let kp = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let c = kp.public.encrypt(&b(17), None, &mut rng).unwrap();
        for x in [0u64, 1, 20, 34] {
            let r = kp.public.eval_polynomial(std::slice::from_ref(&c), &b(x)).unwrap();
            assert_eq!(kp.decrypt(&r).unwrap(), b(17));
        }
    }
}
