use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Polynomial over Z_modulus, coefficients stored lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    coefficients: Vec<BigUint>,
    modulus: BigUint,
}

impl Polynomial {
    pub fn new(coefficients: Vec<BigUint>, modulus: BigUint) -> Self {
        let coefficients = coefficients.into_iter().map(|c| c % &modulus).collect();
        Polynomial { coefficients, modulus }
    }

    /// Monic polynomial with the given roots, built by multiplying in one
    /// `(x - r)` factor at a time. No roots gives the constant 1.
    pub fn from_roots(roots: &[BigUint], modulus: &BigUint) -> Self {
        let mut coeffs = vec![BigUint::one() % modulus];
        for root in roots {
            let neg_root = (modulus - root % modulus) % modulus;
            // (a_0 + a_1 x + ...)(x - r): shift up, then add -r * a_j to slot j.
            coeffs.insert(0, BigUint::zero());
            for j in 0..coeffs.len() - 1 {
                let term = &coeffs[j + 1] * &neg_root % modulus;
                coeffs[j] = (&coeffs[j] + term) % modulus;
            }
        }
        Polynomial { coefficients: coeffs, modulus: modulus.clone() }
    }

    pub fn coefficients(&self) -> &[BigUint] {
        &self.coefficients
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// Horner's rule: `degree` multiplications and additions.
    pub fn eval(&self, x: &BigUint) -> BigUint {
        let x = x % &self.modulus;
        self.coefficients
            .iter()
            .rev()
            .fold(BigUint::zero(), |acc, c| (acc * &x + c) % &self.modulus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::RandBigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn b(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn two_roots_mod_101() {
        let p = Polynomial::from_roots(&[b(2), b(3)], &b(101));
        assert_eq!(p.coefficients(), &[b(6), b(96), b(1)]);
        assert_eq!(p.degree(), 2);
        assert_eq!(p.eval(&b(2)), b(0));
        assert_eq!(p.eval(&b(3)), b(0));
        assert_eq!(p.eval(&b(0)), b(6));
    }

    #[test]
    fn single_and_empty_roots() {
        let m = b(1009);
        assert_eq!(Polynomial::from_roots(&[b(40)], &m).coefficients(), &[b(969), b(1)]);
        let one = Polynomial::from_roots(&[], &m);
        assert_eq!(one.coefficients(), &[b(1)]);
        assert_eq!(one.degree(), 0);
    }

    #[test]
    fn vanishes_on_random_roots() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let m = BigUint::parse_bytes(b"340282366920938463463374607431768211297", 10).unwrap();
        for _ in 0..100 {
            let k = rng.gen_range(0..=32);
            let roots: Vec<BigUint> = (0..k).map(|_| rng.gen_biguint_below(&m)).collect();
            let p = Polynomial::from_roots(&roots, &m);
            assert_eq!(p.degree(), k);
            assert!(p.coefficients().last().unwrap().is_one());
            for r in &roots {
                assert!(p.eval(r).is_zero());
            }
        }
    }

    #[test]
    fn horner_matches_power_sum() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let m = b(1_000_000_007);
        for _ in 0..100 {
            let deg = rng.gen_range(0..20);
            let coeffs: Vec<BigUint> = (0..=deg).map(|_| rng.gen_biguint_below(&m)).collect();
            let x = rng.gen_biguint_below(&m);
            let p = Polynomial::new(coeffs.clone(), m.clone());
            let naive = coeffs
                .iter()
                .enumerate()
                .fold(BigUint::zero(), |acc, (j, c)| (acc + c * x.modpow(&b(j as u64), &m)) % &m);
            assert_eq!(p.eval(&x), naive);
        }
    }
}
