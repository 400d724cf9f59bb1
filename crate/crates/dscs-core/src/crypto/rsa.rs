//! Safe-prime RSA setup, modular multi-exponentiation and e-th roots.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use super::primes::gen_safe_prime;
use crate::error::{Error, Result};

/// Public RSA modulus N = p*q, product of two distinct safe primes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsaModulus {
    pub n: BigUint,
    pub bit_length: usize,
}

/// Secret factorization plus a cache of root exponents e -> e^-1 mod phi(N).
#[derive(Debug)]
pub struct RsaTrapdoor {
    pub p: BigUint,
    pub q: BigUint,
    phi: BigUint,
    d_cache: Mutex<HashMap<BigUint, BigUint>>,
}

impl Clone for RsaTrapdoor {
    fn clone(&self) -> Self {
        // The exponent cache is cheap to refill; start it empty.
        RsaTrapdoor::new(self.p.clone(), self.q.clone())
    }
}

impl RsaTrapdoor {
    pub fn new(p: BigUint, q: BigUint) -> Self {
        let phi = (&p - 1u32) * (&q - 1u32);
        RsaTrapdoor {
            p,
            q,
            phi,
            d_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn modulus(&self) -> RsaModulus {
        let n = &self.p * &self.q;
        let bit_length = n.bits() as usize;
        RsaModulus { n, bit_length }
    }

    pub fn phi(&self) -> &BigUint {
        &self.phi
    }

    /// e^-1 mod phi(N), cached per e.
    pub fn root_exponent(&self, e: &BigUint) -> Result<BigUint> {
        if let Some(d) = self.d_cache.lock().unwrap().get(e) {
            return Ok(d.clone());
        }
        let d = mod_inverse(e, &self.phi).ok_or(Error::NotInvertible)?;
        self.d_cache
            .lock()
            .unwrap()
            .insert(e.clone(), d.clone());
        Ok(d)
    }
}

/// Generate a safe-prime trapdoor; both factors have `prime_bits` bits.
pub fn gen_trapdoor(prime_bits: usize, rng: &mut impl Rng) -> RsaTrapdoor {
    let p = gen_safe_prime(prime_bits, rng);
    let q = loop {
        let q = gen_safe_prime(prime_bits, rng);
        if q != p {
            break q;
        }
    };
    RsaTrapdoor::new(p, q)
}

/// a^-1 mod m via extended gcd; None when gcd(a, m) != 1.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from_biguint(Sign::Plus, a.clone());
    let m_int = BigInt::from_biguint(Sign::Plus, m.clone());
    let ext = a.extended_gcd(&m_int);
    if !ext.gcd.is_one() {
        return None;
    }
    let mut x = ext.x % &m_int;
    if x.is_negative() {
        x += &m_int;
    }
    Some(x.to_biguint().unwrap())
}

/// Product of bases_i ^ exps_i mod N. Contract: equals the naive
/// sequential computation.
pub fn multi_exp(bases: &[BigUint], exps: &[BigUint], n: &BigUint) -> Result<BigUint> {
    if bases.len() != exps.len() || bases.is_empty() {
        return Err(Error::LengthMismatch);
    }
    let mut acc = BigUint::one();
    for (b, e) in bases.iter().zip(exps) {
        if e.is_zero() {
            continue;
        }
        acc = acc * b.modpow(e, n) % n;
    }
    Ok(acc)
}

/// x with x^e = a (mod N), via x = a^(e^-1 mod phi(N)).
pub fn eth_root(a: &BigUint, e: &BigUint, trapdoor: &RsaTrapdoor) -> Result<BigUint> {
    let d = trapdoor.root_exponent(e)?;
    Ok(a.modpow(&d, &trapdoor.modulus().n))
}

/// Uniform element of Z_N^* (gcd check; a common factor with a safe-prime
/// modulus is astronomically unlikely but rejected anyway).
pub fn rand_unit(n: &BigUint, rng: &mut impl Rng) -> BigUint {
    loop {
        let x = rng.gen_biguint_range(&BigUint::one(), n);
        if x.gcd(n).is_one() {
            return x;
        }
    }
}
