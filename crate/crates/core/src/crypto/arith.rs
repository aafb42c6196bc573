//! Big-integer helpers shared by the public-key code.

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::CryptoError;

/// Bounded retries for prime and coprime sampling.
pub const MAX_SAMPLING_RETRIES: usize = 128;

/// Number of Miller-Rabin rounds; error probability below 4^-40.
const MILLER_RABIN_ROUNDS: usize = 40;

const SMALL_PRIMES: [u32; 53] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Left-to-right binary square-and-multiply: `base^exponent mod modulus`.
///
/// Uses Montgomery multiplication when the modulus is odd and larger than a
/// machine word, and plain multiply-then-reduce otherwise.
pub fn mod_exp(base: &BigUint, exponent: &BigUint, modulus: &BigUint) -> Result<BigUint, CryptoError> {
    if modulus.is_zero() {
        return Err(CryptoError::Domain("modulus must be nonzero".into()));
    }
    if modulus.is_one() {
        return Ok(BigUint::zero());
    }
    if modulus.is_odd() && modulus.bits() > 64 {
        return Ok(Montgomery::new(modulus).pow(base, exponent));
    }
    let mut acc = BigUint::one();
    let base = base % modulus;
    for i in (0..exponent.bits()).rev() {
        acc = &acc * &acc % modulus;
        if exponent.bit(i) {
            acc = &acc * &base % modulus;
        }
    }
    Ok(acc)
}

/// Montgomery arithmetic modulo a fixed odd modulus, on 64-bit limbs.
///
/// `mul` is the CIOS variant: interleaved multiply and reduce, one pass per
/// limb of the multiplier.
#[derive(Clone, Debug)]
pub struct Montgomery {
    modulus: BigUint,
    limbs: Vec<u64>,
    /// -modulus^-1 mod 2^64
    n0_inv: u64,
    /// R^2 mod modulus, R = 2^(64 * limbs)
    r2: Vec<u64>,
}

impl Montgomery {
    pub fn new(modulus: &BigUint) -> Self {
        assert!(modulus.is_odd(), "Montgomery modulus must be odd");
        let limbs = modulus.to_u64_digits();
        let n = limbs.len();
        // Newton iteration for the inverse of limbs[0] modulo 2^64.
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(limbs[0].wrapping_mul(inv)));
        }
        let r2 = (BigUint::one() << (128 * n)) % modulus;
        Montgomery {
            modulus: modulus.clone(),
            n0_inv: inv.wrapping_neg(),
            r2: pad(r2.to_u64_digits(), n),
            limbs,
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let n = self.limbs.len();
        let m = &self.limbs;
        let mut t = vec![0u64; n + 2];
        for &ai in a.iter().take(n) {
            let mut carry: u128 = 0;
            for j in 0..n {
                let s = t[j] as u128 + (ai as u128) * (b[j] as u128) + carry;
                t[j] = s as u64;
                carry = s >> 64;
            }
            let s = t[n] as u128 + carry;
            t[n] = s as u64;
            t[n + 1] = (s >> 64) as u64;

            let q = t[0].wrapping_mul(self.n0_inv);
            let s = t[0] as u128 + (q as u128) * (m[0] as u128);
            let mut carry = s >> 64;
            for j in 1..n {
                let s = t[j] as u128 + (q as u128) * (m[j] as u128) + carry;
                t[j - 1] = s as u64;
                carry = s >> 64;
            }
            let s = t[n] as u128 + carry;
            t[n - 1] = s as u64;
            t[n] = t[n + 1] + (s >> 64) as u64;
            t[n + 1] = 0;
        }
        t.truncate(n + 1);
        if t[n] != 0 || !lt(&t[..n], m) {
            sub_in_place(&mut t, m);
        }
        t.truncate(n);
        t
    }

    fn to_mont(&self, x: &BigUint) -> Vec<u64> {
        let x = pad((x % &self.modulus).to_u64_digits(), self.limbs.len());
        self.mul(&x, &self.r2)
    }

    fn leave_mont(&self, x: &[u64]) -> BigUint {
        let mut one = vec![0u64; self.limbs.len()];
        one[0] = 1;
        BigUint::from_slice(&to_u32(&self.mul(x, &one)))
    }

    pub fn pow(&self, base: &BigUint, exponent: &BigUint) -> BigUint {
        let b = self.to_mont(base);
        let mut acc = self.to_mont(&BigUint::one());
        for i in (0..exponent.bits()).rev() {
            acc = self.mul(&acc, &acc);
            if exponent.bit(i) {
                acc = self.mul(&acc, &b);
            }
        }
        self.leave_mont(&acc)
    }
}

fn pad(mut v: Vec<u64>, n: usize) -> Vec<u64> {
    v.resize(n, 0);
    v
}

fn lt(a: &[u64], b: &[u64]) -> bool {
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x < y;
        }
    }
    false
}

fn sub_in_place(a: &mut [u64], b: &[u64]) {
    let mut borrow = 0u64;
    for (i, ai) in a.iter_mut().enumerate() {
        let bi = b.get(i).copied().unwrap_or(0);
        let (d1, o1) = ai.overflowing_sub(bi);
        let (d2, o2) = d1.overflowing_sub(borrow);
        *ai = d2;
        borrow = (o1 || o2) as u64;
    }
}

fn to_u32(v: &[u64]) -> Vec<u32> {
    v.iter().flat_map(|&x| [x as u32, (x >> 32) as u32]).collect()
}

/// Modular inverse via the extended Euclidean algorithm.
pub fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Option<BigUint> {
    if modulus.is_zero() {
        return None;
    }
    let m = BigInt::from_biguint(Sign::Plus, modulus.clone());
    let a = BigInt::from_biguint(Sign::Plus, a % modulus);
    let ext = a.extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    ext.x.mod_floor(&m).to_biguint()
}

/// Jacobi symbol (a/n) for odd positive n. Returns -1, 0 or 1.
pub fn jacobi(a: &BigUint, n: &BigUint) -> i8 {
    assert!(n.is_odd(), "jacobi symbol needs an odd modulus");
    let mut a = a % n;
    let mut n = n.clone();
    let mut result = 1i8;
    while !a.is_zero() {
        let tz = a.trailing_zeros().unwrap_or(0);
        a >>= tz;
        let n_mod8 = (&n & BigUint::from(7u8)).to_u32_digits().first().copied().unwrap_or(0);
        if tz % 2 == 1 && (n_mod8 == 3 || n_mod8 == 5) {
            result = -result;
        }
        std::mem::swap(&mut a, &mut n);
        let a_mod4 = low_u32(&a) & 3;
        let n_mod4 = low_u32(&n) & 3;
        if a_mod4 == 3 && n_mod4 == 3 {
            result = -result;
        }
        a %= &n;
    }
    if n.is_one() {
        result
    } else {
        0
    }
}

fn low_u32(x: &BigUint) -> u32 {
    x.to_u32_digits().first().copied().unwrap_or(0)
}

pub fn lcm(a: &BigUint, b: &BigUint) -> BigUint {
    a.lcm(b)
}

/// Miller-Rabin with trial division by small primes first.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    if *n == two {
        return true;
    }
    if n.is_even() {
        return false;
    }
    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let mont = (n.bits() > 64).then(|| Montgomery::new(n));
    let pow = |b: &BigUint, e: &BigUint| match &mont {
        Some(m) => m.pow(b, e),
        None => b.modpow(e, n),
    };
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = pow(&a, &d);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = &x * &x % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Random prime with exactly `bits` bits (top two bits set, so a product of
/// two such primes has exactly `2 * bits` bits).
pub fn random_prime<R: RngCore + CryptoRng + ?Sized>(
    bits: u64,
    rng: &mut R,
) -> Result<BigUint, CryptoError> {
    if bits < 8 {
        return Err(CryptoError::KeyGeneration(format!("prime size {bits} too small")));
    }
    // Prime density is ~1/ln(2^bits); allow generously many candidates.
    let attempts = MAX_SAMPLING_RETRIES * bits as usize;
    for _ in 0..attempts {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, rng) {
            return Ok(candidate);
        }
    }
    Err(CryptoError::KeyGeneration(format!(
        "no {bits}-bit prime found after {attempts} candidates"
    )))
}

/// Random safe prime p = 2q + 1 of `bits` bits. Returns (p, q).
pub fn random_safe_prime<R: RngCore + CryptoRng + ?Sized>(
    bits: u64,
    rng: &mut R,
) -> Result<(BigUint, BigUint), CryptoError> {
    if bits < 8 {
        return Err(CryptoError::KeyGeneration(format!("safe prime size {bits} too small")));
    }
    let attempts = 64 * MAX_SAMPLING_RETRIES * bits as usize;
    for _ in 0..attempts {
        let mut q = rng.gen_biguint(bits - 1);
        q.set_bit(bits - 2, true);
        q.set_bit(0, true);
        // q ≡ 2 mod 3 is required for p = 2q+1 to avoid divisibility by 3
        if (&q % 3u8) != BigUint::from(2u8) && bits > 3 {
            continue;
        }
        let p: BigUint = (&q << 1) + 1u8;
        if quick_composite(&q) || quick_composite(&p) {
            continue;
        }
        if is_probable_prime(&q, rng) && is_probable_prime(&p, rng) {
            return Ok((p, q));
        }
    }
    Err(CryptoError::KeyGeneration(format!(
        "no {bits}-bit safe prime found after {attempts} candidates"
    )))
}

fn quick_composite(n: &BigUint) -> bool {
    SMALL_PRIMES.iter().any(|&p| {
        let p = BigUint::from(p);
        *n != p && (n % &p).is_zero()
    })
}

/// Uniform element of [1, modulus) coprime to `modulus`, by rejection sampling.
pub fn random_coprime<R: RngCore + CryptoRng + ?Sized>(
    modulus: &BigUint,
    rng: &mut R,
) -> Result<BigUint, CryptoError> {
    let one = BigUint::one();
    if *modulus <= one {
        return Err(CryptoError::Domain("modulus must exceed 1".into()));
    }
    for _ in 0..MAX_SAMPLING_RETRIES {
        let r = rng.gen_biguint_range(&one, modulus);
        if r.gcd(modulus).is_one() {
            return Ok(r);
        }
    }
    Err(CryptoError::Parameter(format!(
        "no unit modulo the {}-bit modulus after {MAX_SAMPLING_RETRIES} samples",
        modulus.bits()
    )))
}
