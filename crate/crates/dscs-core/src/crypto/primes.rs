//! Probabilistic primality testing and (safe) prime generation.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};

const MILLER_RABIN_ROUNDS: usize = 40;
const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Miller-Rabin with random bases; error probability <= 4^-rounds.
pub fn is_prime(n: &BigUint, rng: &mut impl Rng) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for p in SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn random_odd_with_top_bit(bits: usize, rng: &mut impl Rng) -> BigUint {
    let mut n = rng.gen_biguint(bits as u64);
    n.set_bit(bits as u64 - 1, true);
    n.set_bit(0, true);
    n
}

/// Random prime with exactly `bits` bits.
pub fn gen_prime(bits: usize, rng: &mut impl Rng) -> BigUint {
    assert!(bits >= 2);
    loop {
        let cand = random_odd_with_top_bit(bits, rng);
        if is_prime(&cand, rng) {
            return cand;
        }
    }
}

/// Random safe prime r with exactly `bits` bits: r and (r-1)/2 both prime,
/// (r-1)/2 odd. Gives up after `attempt_cap` candidates.
pub fn gen_safe_prime_capped(
    bits: usize,
    attempt_cap: usize,
    rng: &mut impl Rng,
) -> Result<BigUint> {
    assert!(bits >= 3);
    let one = BigUint::one();
    for _ in 0..attempt_cap {
        let mut cand = random_odd_with_top_bit(bits, rng);
        // Force r = 3 (mod 4) so (r-1)/2 is odd.
        cand.set_bit(1, true);
        let half = (&cand - &one) >> 1;
        if is_prime(&half, rng) && is_prime(&cand, rng) {
            return Ok(cand);
        }
    }
    Err(Error::GenerationTimeout)
}

pub fn gen_safe_prime(bits: usize, rng: &mut impl Rng) -> BigUint {
    // Safe primes have density ~ c / ln^2(2^bits); the cap is far above
    // the expected number of trials.
    gen_safe_prime_capped(bits, 2000 * bits * bits, rng).expect("attempt cap not reachable")
}
