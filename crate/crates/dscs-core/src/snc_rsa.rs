//! RSA-based homomorphic network-coding authenticator.
//!
//! Blocks are vectors of n segments over F_e (e a public prime). Each
//! block i gets a tag (s_i, x_i) with
//!
//! ```text
//! x_i^e = g^{s_i} * (prod_j g_j^{v_ij}) * h_i   (mod N)
//! ```
//!
//! Tags combine homomorphically: a linear combination w = sum nu_i * u_i
//! of augmented vectors carries a combined tag that verifies against the
//! public key alone. All exponent arithmetic runs over F_e with the
//! integer carries divided out explicitly, so the combination is exact.

use std::collections::BTreeMap;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::crypto::primes::gen_prime;
use crate::crypto::rsa::{gen_trapdoor, mod_inverse, multi_exp, rand_unit, RsaTrapdoor};
use crate::error::{Error, Result};
use crate::profile::SecurityProfile;
use crate::wire::{encode_int, put_int, put_u32, put_vec, Cursor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SncRsaPublicKey {
    pub modulus: BigUint,
    /// Public prime; the tag field modulus and the file identifier.
    pub e: BigUint,
    pub g: BigUint,
    pub g_list: Vec<BigUint>,
    /// One residue per block; mutated in step with the file under DSCS I.
    pub h_list: Vec<BigUint>,
}

impl SncRsaPublicKey {
    pub fn n(&self) -> usize {
        self.g_list.len()
    }

    pub fn m(&self) -> usize {
        self.h_list.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, 1);
        put_int(&mut out, &self.modulus);
        put_int(&mut out, &self.e);
        put_int(&mut out, &self.g);
        put_vec(&mut out, &self.g_list, |o, v| put_int(o, v));
        put_vec(&mut out, &self.h_list, |o, v| put_int(o, v));
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        if c.get_u32()? != 1 {
            return Err(Error::Malformed("unknown public key version"));
        }
        let modulus = c.get_int()?;
        let e = c.get_int()?;
        let g = c.get_int()?;
        let mut g_list = Vec::new();
        for _ in 0..c.get_count()? {
            g_list.push(c.get_int()?);
        }
        let mut h_list = Vec::new();
        for _ in 0..c.get_count()? {
            h_list.push(c.get_int()?);
        }
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after public key"));
        }
        Ok(SncRsaPublicKey {
            modulus,
            e,
            g,
            g_list,
            h_list,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SncRsaTag {
    pub s: BigUint,
    pub x: BigUint,
}

impl SncRsaTag {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = encode_int(&self.s);
        put_int(&mut out, &self.x);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let s = c.get_int()?;
        let x = c.get_int()?;
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after tag"));
        }
        Ok(SncRsaTag { s, x })
    }
}

/// A data vector with its combination part: n segments plus a sparse
/// map (1-based block index -> coefficient) covering the appended unit
/// positions. Challenges touch few blocks, so the coefficient part
/// stays sparse until verification densifies it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedVector {
    pub data: Vec<BigUint>,
    pub coeffs: BTreeMap<usize, BigUint>,
}

impl AugmentedVector {
    /// Fresh augmentation of block i: [v_i | e_i].
    pub fn unit(data: Vec<BigUint>, i: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(i, BigUint::one());
        AugmentedVector { data, coeffs }
    }
}

/// Generate the key material shared by tagging and verification: a
/// safe-prime modulus, the public prime e and the generator residues.
/// e is resampled until it is coprime to phi(N).
pub fn gen_keys(
    profile: &SecurityProfile,
    m: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<(SncRsaPublicKey, RsaTrapdoor)> {
    if m == 0 || n == 0 {
        return Err(Error::Malformed("m and n must be positive"));
    }
    let sk = gen_trapdoor(profile.prime_bits, rng);
    let nn = sk.modulus().n;
    let e = loop {
        let cand = gen_prime(profile.e_bits, rng);
        if cand.gcd(sk.phi()).is_one() {
            break cand;
        }
    };
    let g = rand_unit(&nn, rng);
    let g_list = (0..n).map(|_| rand_unit(&nn, rng)).collect();
    let h_list = (0..m).map(|_| rand_unit(&nn, rng)).collect();
    Ok((
        SncRsaPublicKey {
            modulus: nn,
            e,
            g,
            g_list,
            h_list,
        },
        sk,
    ))
}

fn check_segments(v: &[BigUint], pk: &SncRsaPublicKey) -> Result<()> {
    if v.len() != pk.n() {
        return Err(Error::LengthMismatch);
    }
    if v.iter().any(|s| s >= &pk.e) {
        return Err(Error::SegmentOutOfField);
    }
    Ok(())
}

/// Tag against an explicit h residue with an explicit mask s. Used
/// directly when inserting a block whose fresh h' is not yet part of
/// the public key; the indexed variants below are the normal entry
/// points.
pub fn tag_gen_raw(
    v: &[BigUint],
    h: &BigUint,
    s: BigUint,
    sk: &RsaTrapdoor,
    pk: &SncRsaPublicKey,
) -> Result<SncRsaTag> {
    check_segments(v, pk)?;
    let nn = &pk.modulus;
    let mut a = pk.g.modpow(&s, nn);
    if !v.is_empty() {
        a = a * multi_exp(&pk.g_list, v, nn)? % nn;
    }
    a = a * h % nn;
    let x = crate::crypto::rsa::eth_root(&a, &pk.e, sk)?;
    Ok(SncRsaTag { s, x })
}

pub fn tag_gen_with_h(
    v: &[BigUint],
    h: &BigUint,
    sk: &RsaTrapdoor,
    pk: &SncRsaPublicKey,
    rng: &mut impl Rng,
) -> Result<SncRsaTag> {
    let s = rng.gen_biguint_below(&pk.e);
    tag_gen_raw(v, h, s, sk, pk)
}

/// Tag block i with an explicit mask s (deterministic).
pub fn tag_gen_with_s(
    v: &[BigUint],
    i: usize,
    s: BigUint,
    sk: &RsaTrapdoor,
    pk: &SncRsaPublicKey,
) -> Result<SncRsaTag> {
    if i < 1 || i > pk.m() {
        return Err(Error::IndexOutOfRange(i));
    }
    let h = pk.h_list[i - 1].clone();
    tag_gen_raw(v, &h, s, sk, pk)
}

pub fn tag_gen(
    v: &[BigUint],
    i: usize,
    sk: &RsaTrapdoor,
    pk: &SncRsaPublicKey,
    rng: &mut impl Rng,
) -> Result<SncRsaTag> {
    let s = rng.gen_biguint_below(&pk.e);
    tag_gen_with_s(v, i, s, sk, pk)
}

/// Check a single block/tag pair at position i.
pub fn verify_single(v: &[BigUint], i: usize, tag: &SncRsaTag, pk: &SncRsaPublicKey) -> bool {
    if check_segments(v, pk).is_err() || i < 1 || i > pk.m() {
        return false;
    }
    let nn = &pk.modulus;
    let lhs = tag.x.modpow(&pk.e, nn);
    let mut rhs = pk.g.modpow(&tag.s, nn);
    rhs = rhs * multi_exp(&pk.g_list, v, nn).expect("lengths checked") % nn;
    rhs = rhs * &pk.h_list[i - 1] % nn;
    lhs == rhs
}

/// Combination with its integer carries exposed (the w', s' of the
/// proof equation); tests replay the exact-integer identities
/// s + e*s' = sum nu_i s_i and w + e*w' = sum nu_i u_i.
#[derive(Debug, Clone)]
pub struct Combined {
    pub w: AugmentedVector,
    pub t: SncRsaTag,
    pub s_carry: BigUint,
    pub data_carry: Vec<BigUint>,
    pub coeff_carry: BTreeMap<usize, BigUint>,
}

pub fn combine_detailed(
    items: &[(AugmentedVector, SncRsaTag, BigUint)],
    pk: &SncRsaPublicKey,
) -> Result<Combined> {
    if items.is_empty() {
        return Err(Error::LengthMismatch);
    }
    let e = &pk.e;
    let nn = &pk.modulus;
    let n = pk.n();
    for (u, _, _) in items {
        if u.data.len() != n {
            return Err(Error::LengthMismatch);
        }
    }

    // Exact integer sums, then split into residue and carry.
    let mut s_total = BigUint::zero();
    let mut data_total = vec![BigUint::zero(); n];
    let mut coeff_total: BTreeMap<usize, BigUint> = BTreeMap::new();
    for (u, t, nu) in items {
        s_total += nu * &t.s;
        for (acc, v) in data_total.iter_mut().zip(&u.data) {
            *acc += nu * v;
        }
        for (k, c) in &u.coeffs {
            *coeff_total.entry(*k).or_default() += nu * c;
        }
    }
    let (s_carry, s) = s_total.div_rem(e);
    let mut data = Vec::with_capacity(n);
    let mut data_carry = Vec::with_capacity(n);
    for v in &data_total {
        let (q, r) = v.div_rem(e);
        data.push(r);
        data_carry.push(q);
    }
    let mut coeffs = BTreeMap::new();
    let mut coeff_carry = BTreeMap::new();
    for (k, v) in &coeff_total {
        let (q, r) = v.div_rem(e);
        coeffs.insert(*k, r);
        coeff_carry.insert(*k, q);
    }

    // x = (prod x_i^{nu_i}) / (g^{s'} prod g_j^{w'_j} prod h_k^{w'_{n+k}})
    let mut num = BigUint::one();
    for (_, t, nu) in items {
        num = num * t.x.modpow(nu, nn) % nn;
    }
    let mut den = pk.g.modpow(&s_carry, nn);
    for (b, q) in pk.g_list.iter().zip(&data_carry) {
        if !q.is_zero() {
            den = den * b.modpow(q, nn) % nn;
        }
    }
    for (k, q) in &coeff_carry {
        if *k < 1 || *k > pk.m() {
            return Err(Error::IndexOutOfRange(*k));
        }
        if !q.is_zero() {
            den = den * pk.h_list[k - 1].modpow(q, nn) % nn;
        }
    }
    let den_inv = mod_inverse(&den, nn).ok_or(Error::NonInvertibleDenominator)?;
    let x = num * den_inv % nn;

    Ok(Combined {
        w: AugmentedVector { data, coeffs },
        t: SncRsaTag { s, x },
        s_carry,
        data_carry,
        coeff_carry,
    })
}

pub fn combine(
    items: &[(AugmentedVector, SncRsaTag, BigUint)],
    pk: &SncRsaPublicKey,
) -> Result<(AugmentedVector, SncRsaTag)> {
    let c = combine_detailed(items, pk)?;
    Ok((c.w, c.t))
}

/// Check the combined pair: x^e ?= g^s prod g_j^{w_j} prod h_k^{w_{n+k}}
/// (absent coefficient slots are zero and drop out of the product).
pub fn verify_combined(w: &AugmentedVector, t: &SncRsaTag, pk: &SncRsaPublicKey) -> bool {
    if w.data.len() != pk.n() {
        return false;
    }
    if w.coeffs.keys().any(|k| *k < 1 || *k > pk.m()) {
        return false;
    }
    let nn = &pk.modulus;
    let lhs = t.x.modpow(&pk.e, nn);
    let mut rhs = pk.g.modpow(&t.s, nn);
    for (b, v) in pk.g_list.iter().zip(&w.data) {
        if !v.is_zero() {
            rhs = rhs * b.modpow(v, nn) % nn;
        }
    }
    for (k, v) in &w.coeffs {
        if !v.is_zero() {
            rhs = rhs * pk.h_list[k - 1].modpow(v, nn) % nn;
        }
    }
    lhs == rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    const M: usize = 6;
    const N: usize = 4;

    fn fixture() -> &'static (SncRsaPublicKey, RsaTrapdoor) {
        static KEY: OnceLock<(SncRsaPublicKey, RsaTrapdoor)> = OnceLock::new();
        KEY.get_or_init(|| {
            let mut r = ChaCha8Rng::seed_from_u64(21);
            let profile = SecurityProfile {
                prime_bits: 40,
                ..SecurityProfile::test()
            };
            gen_keys(&profile, M, N, &mut r).unwrap()
        })
    }

    fn rand_block(pk: &SncRsaPublicKey, r: &mut ChaCha8Rng) -> Vec<BigUint> {
        (0..pk.n()).map(|_| r.gen_biguint_below(&pk.e)).collect()
    }

    #[test]
    fn honest_tag_verifies_and_binds_index() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let v = rand_block(pk, &mut r);
        let t = tag_gen(&v, 2, sk, pk, &mut r).unwrap();
        assert!(verify_single(&v, 2, &t, pk));
        assert!(!verify_single(&v, 3, &t, pk));
        let mut v2 = v.clone();
        v2[1] = (&v2[1] + 1u32) % &pk.e;
        assert!(!verify_single(&v2, 2, &t, pk));
    }

    #[test]
    fn zero_block_with_zero_s_is_eth_root_of_h() {
        let (pk, sk) = fixture();
        let v = vec![BigUint::zero(); N];
        let t = tag_gen_with_s(&v, 3, BigUint::zero(), sk, pk).unwrap();
        let root = crate::crypto::rsa::eth_root(&pk.h_list[2], &pk.e, sk).unwrap();
        assert_eq!(t.x, root);
        assert!(verify_single(&v, 3, &t, pk));
    }

    #[test]
    fn oversized_segment_rejected() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let mut v = rand_block(pk, &mut r);
        v[0] = pk.e.clone();
        assert!(matches!(
            tag_gen(&v, 1, sk, pk, &mut r),
            Err(Error::SegmentOutOfField)
        ));
    }

    #[test]
    fn single_item_combination_is_identity() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let v = rand_block(pk, &mut r);
        let t = tag_gen(&v, 1, sk, pk, &mut r).unwrap();
        let u = AugmentedVector::unit(v, 1);
        let (w, tc) = combine(&[(u.clone(), t.clone(), BigUint::one())], pk).unwrap();
        assert_eq!(w, u);
        assert_eq!(tc, t);
    }

    fn random_items(
        l: usize,
        r: &mut ChaCha8Rng,
    ) -> Vec<(AugmentedVector, SncRsaTag, BigUint)> {
        let (pk, sk) = fixture();
        (0..l)
            .map(|j| {
                let i = j % M + 1;
                let v = rand_block(pk, r);
                let t = tag_gen(&v, i, sk, pk, r).unwrap();
                let nu = r.gen_biguint_below(&pk.e);
                (AugmentedVector::unit(v, i), t, nu)
            })
            .collect()
    }

    #[test]
    fn homomorphic_combination_verifies() {
        let (pk, _) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        for l in [2usize, 3, 6] {
            let items = random_items(l, &mut r);
            let (w, t) = combine(&items, pk).unwrap();
            assert!(verify_combined(&w, &t, pk), "l={l}");
        }
    }

    #[test]
    fn carry_identities_hold_exactly() {
        let (pk, _) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let items = random_items(3, &mut r);
            let c = combine_detailed(&items, pk).unwrap();
            // s + e*s' = sum nu_i s_i over the integers.
            let s_sum: BigUint = items.iter().map(|(_, t, nu)| nu * &t.s).sum();
            assert_eq!(&c.t.s + &pk.e * &c.s_carry, s_sum);
            // Same per data position and per coefficient slot.
            for j in 0..pk.n() {
                let col: BigUint = items.iter().map(|(u, _, nu)| nu * &u.data[j]).sum();
                assert_eq!(&c.w.data[j] + &pk.e * &c.data_carry[j], col);
            }
            for (k, v) in &c.w.coeffs {
                let col: BigUint = items
                    .iter()
                    .map(|(u, _, nu)| nu * u.coeffs.get(k).cloned().unwrap_or_default())
                    .sum();
                assert_eq!(v + &pk.e * &c.coeff_carry[k], col);
            }
        }
    }

    #[test]
    fn s_component_is_linear() {
        let (pk, _) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let items = random_items(4, &mut r);
        let (_, t) = combine(&items, pk).unwrap();
        let expect: BigUint =
            items.iter().map(|(_, t, nu)| nu * &t.s).sum::<BigUint>() % &pk.e;
        assert_eq!(t.s, expect);
    }

    #[test]
    fn single_field_mutations_rejected() {
        let (pk, _) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let items = random_items(3, &mut r);
        let (w, t) = combine(&items, pk).unwrap();
        assert!(verify_combined(&w, &t, pk));

        let mut w2 = w.clone();
        w2.data[0] = (&w2.data[0] + 1u32) % &pk.e;
        assert!(!verify_combined(&w2, &t, pk));

        let mut w3 = w.clone();
        let k = *w3.coeffs.keys().next().unwrap();
        w3.coeffs.insert(k, BigUint::zero());
        assert!(!verify_combined(&w3, &t, pk));

        let mut t2 = t.clone();
        t2.s = (&t2.s + 1u32) % &pk.e;
        assert!(!verify_combined(&w, &t2, pk));

        let mut t3 = t.clone();
        t3.x = (&t3.x + 1u32) % &pk.modulus;
        assert!(!verify_combined(&w, &t3, pk));
    }

    #[test]
    fn random_forgeries_rejected() {
        let (pk, _) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let items = random_items(2, &mut r);
        let (w, t) = combine(&items, pk).unwrap();
        for _ in 0..500 {
            let forged = SncRsaTag {
                s: t.s.clone(),
                x: r.gen_biguint_below(&pk.modulus),
            };
            assert!(!verify_combined(&w, &forged, pk));
        }
    }

    #[test]
    fn key_and_tag_encodings_round_trip() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(SncRsaPublicKey::decode(&pk.encode()).unwrap(), *pk);
        let v = rand_block(pk, &mut r);
        let t = tag_gen(&v, 4, sk, pk, &mut r).unwrap();
        assert_eq!(SncRsaTag::decode(&t.encode()).unwrap(), t);
    }

    #[test]
    fn e_is_coprime_to_phi() {
        let (pk, sk) = fixture();
        assert!(pk.e.gcd(sk.phi()).is_one());
    }
}
