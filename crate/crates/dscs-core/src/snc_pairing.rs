//! Pairing-based homomorphic network-coding signature used by DSCS II.
//!
//! Block i of file fid gets the tag
//!
//! ```text
//! t_i = (H(fid || i) * prod_j g_j^{v_ij})^alpha
//! ```
//!
//! and combinations multiply tags: t = prod t_i^{nu_i}. The verifier only
//! needs the public key: e(t, h) ?= e(prod H(fid||k)^{w_{n+k}} * prod
//! g_j^{w_j}, z) with z = h^alpha. Segments and coefficients live in the
//! group's scalar field.

use std::collections::BTreeMap;

use bls12_381::{G1Projective, G2Projective, Scalar};
use rand::RngCore;

use crate::crypto::pairing::{
    g1_from_bytes, g1_to_bytes, g2_from_bytes, g2_to_bytes, hash_to_g1, rand_g1, rand_g2,
    rand_scalar, scalar_from_bytes, scalar_to_bytes, BilinearSuite,
};
use crate::error::{Error, Result};
use crate::wire::{put_bytes, put_u32, put_vec, Cursor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SncPairPublicKey {
    pub suite: BilinearSuite,
    pub g_list: Vec<G1Projective>,
    pub h: G2Projective,
    /// h^alpha.
    pub z: G2Projective,
}

impl SncPairPublicKey {
    pub fn n(&self) -> usize {
        self.g_list.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, 1);
        put_bytes(&mut out, self.suite.curve_id.as_bytes());
        put_bytes(&mut out, self.suite.hash_to_group_id.as_bytes());
        put_vec(&mut out, &self.g_list, |o, p| put_bytes(o, &g1_to_bytes(p)));
        put_bytes(&mut out, &g2_to_bytes(&self.h));
        put_bytes(&mut out, &g2_to_bytes(&self.z));
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        if c.get_u32()? != 1 {
            return Err(Error::Malformed("unknown public key version"));
        }
        let curve_id = String::from_utf8(c.get_bytes()?.to_vec())
            .map_err(|_| Error::Malformed("suite descriptor is not UTF-8"))?;
        let hash_to_group_id = String::from_utf8(c.get_bytes()?.to_vec())
            .map_err(|_| Error::Malformed("suite descriptor is not UTF-8"))?;
        let suite = BilinearSuite {
            curve_id,
            hash_to_group_id,
        };
        suite.check_supported()?;
        let mut g_list = Vec::new();
        for _ in 0..c.get_count()? {
            g_list.push(g1_from_bytes(c.get_bytes()?)?);
        }
        let h = g2_from_bytes(c.get_bytes()?)?;
        let z = g2_from_bytes(c.get_bytes()?)?;
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after public key"));
        }
        Ok(SncPairPublicKey { suite, g_list, h, z })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SncPairSecret {
    pub alpha: Scalar,
}

impl SncPairSecret {
    pub fn encode(&self) -> Vec<u8> {
        scalar_to_bytes(&self.alpha)
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        Ok(SncPairSecret {
            alpha: scalar_from_bytes(buf)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SncPairTag {
    pub t: G1Projective,
}

impl SncPairTag {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_bytes(&mut out, &g1_to_bytes(&self.t));
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let t = g1_from_bytes(c.get_bytes()?)?;
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after tag"));
        }
        Ok(SncPairTag { t })
    }
}

/// Data vector over the scalar field with its sparse combination part
/// (1-based block index -> coefficient), mirroring the RSA-side layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairVector {
    pub data: Vec<Scalar>,
    pub coeffs: BTreeMap<usize, Scalar>,
}

impl PairVector {
    pub fn unit(data: Vec<Scalar>, i: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(i, Scalar::one());
        PairVector { data, coeffs }
    }
}

pub fn pair_gen_keys(n: usize, rng: &mut impl RngCore) -> (SncPairPublicKey, SncPairSecret) {
    let alpha = rand_scalar(rng);
    let h = rand_g2(rng);
    let g_list = (0..n).map(|_| rand_g1(rng)).collect();
    (
        SncPairPublicKey {
            suite: BilinearSuite::default(),
            g_list,
            h,
            z: h * alpha,
        },
        SncPairSecret { alpha },
    )
}

fn base_point(v: &[Scalar], i: usize, fid: &[u8], pk: &SncPairPublicKey) -> Result<G1Projective> {
    if v.len() != pk.n() {
        return Err(Error::LengthMismatch);
    }
    if i < 1 {
        return Err(Error::IndexOutOfRange(i));
    }
    let mut p = hash_to_g1(fid, i as u64);
    for (g, s) in pk.g_list.iter().zip(v) {
        p += g * s;
    }
    Ok(p)
}

pub fn pair_tag_gen(
    v: &[Scalar],
    i: usize,
    fid: &[u8],
    sk: &SncPairSecret,
    pk: &SncPairPublicKey,
) -> Result<SncPairTag> {
    Ok(SncPairTag {
        t: base_point(v, i, fid, pk)? * sk.alpha,
    })
}

pub fn pair_combine(
    items: &[(PairVector, SncPairTag, Scalar)],
    pk: &SncPairPublicKey,
) -> Result<(PairVector, SncPairTag)> {
    if items.is_empty() {
        return Err(Error::LengthMismatch);
    }
    let n = pk.n();
    let mut data = vec![Scalar::zero(); n];
    let mut coeffs: BTreeMap<usize, Scalar> = BTreeMap::new();
    let mut t = G1Projective::identity();
    for (u, tag, nu) in items {
        if u.data.len() != n {
            return Err(Error::LengthMismatch);
        }
        for (acc, s) in data.iter_mut().zip(&u.data) {
            *acc += nu * s;
        }
        for (k, c) in &u.coeffs {
            *coeffs.entry(*k).or_insert_with(Scalar::zero) += nu * c;
        }
        t += tag.t * nu;
    }
    Ok((PairVector { data, coeffs }, SncPairTag { t }))
}

/// Public verification of a combined pair under fid:
/// e(t, h) ?= e(prod H(fid||k)^{w_{n+k}} * prod g_j^{w_j}, z).
pub fn pair_verify(w: &PairVector, t: &SncPairTag, fid: &[u8], pk: &SncPairPublicKey) -> bool {
    if w.data.len() != pk.n() || w.coeffs.keys().any(|k| *k < 1) {
        return false;
    }
    let mut rhs_base = G1Projective::identity();
    for (k, c) in &w.coeffs {
        rhs_base += hash_to_g1(fid, *k as u64) * c;
    }
    for (g, s) in pk.g_list.iter().zip(&w.data) {
        rhs_base += g * s;
    }
    pk.suite.pair(&t.t, &pk.h) == pk.suite.pair(&rhs_base, &pk.z)
}

/// Secret-key form of the same check: t ?= base^alpha. Cheaper when the
/// verifier holds alpha (the data owner auditing her own file).
pub fn pair_verify_secret(
    w: &PairVector,
    t: &SncPairTag,
    fid: &[u8],
    sk: &SncPairSecret,
    pk: &SncPairPublicKey,
) -> bool {
    if w.data.len() != pk.n() || w.coeffs.keys().any(|k| *k < 1) {
        return false;
    }
    let mut base = G1Projective::identity();
    for (k, c) in &w.coeffs {
        base += hash_to_g1(fid, *k as u64) * c;
    }
    for (g, s) in pk.g_list.iter().zip(&w.data) {
        base += g * s;
    }
    base * sk.alpha == t.t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    const N: usize = 4;
    const FID: &[u8] = b"pairing-fixture-fid";

    fn fixture() -> &'static (SncPairPublicKey, SncPairSecret) {
        static KEY: OnceLock<(SncPairPublicKey, SncPairSecret)> = OnceLock::new();
        KEY.get_or_init(|| {
            let mut r = ChaCha8Rng::seed_from_u64(31);
            pair_gen_keys(N, &mut r)
        })
    }

    fn rand_block(r: &mut ChaCha8Rng) -> Vec<Scalar> {
        (0..N).map(|_| rand_scalar(r)).collect()
    }

    fn random_items(l: usize, r: &mut ChaCha8Rng) -> Vec<(PairVector, SncPairTag, Scalar)> {
        let (pk, sk) = fixture();
        (0..l)
            .map(|j| {
                let v = rand_block(r);
                let t = pair_tag_gen(&v, j + 1, FID, sk, pk).unwrap();
                (PairVector::unit(v, j + 1), t, rand_scalar(r))
            })
            .collect()
    }

    #[test]
    fn unit_tag_verifies_both_forms() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let v = rand_block(&mut r);
        let t = pair_tag_gen(&v, 5, FID, sk, pk).unwrap();
        let w = PairVector::unit(v, 5);
        assert!(pair_verify(&w, &t, FID, pk));
        assert!(pair_verify_secret(&w, &t, FID, sk, pk));
    }

    #[test]
    fn zero_block_tag_is_hash_power() {
        let (pk, sk) = fixture();
        let v = vec![Scalar::zero(); N];
        let t = pair_tag_gen(&v, 2, FID, sk, pk).unwrap();
        assert_eq!(t.t, hash_to_g1(FID, 2) * sk.alpha);
    }

    #[test]
    fn tags_bind_index_and_fid() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let v = rand_block(&mut r);
        let t1 = pair_tag_gen(&v, 1, FID, sk, pk).unwrap();
        let t2 = pair_tag_gen(&v, 2, FID, sk, pk).unwrap();
        assert_ne!(t1, t2);
        // Unit vector at the wrong position or under the wrong fid fails.
        assert!(!pair_verify(&PairVector::unit(v.clone(), 2), &t1, FID, pk));
        assert!(!pair_verify(&PairVector::unit(v, 1), &t1, b"other-fid", pk));
    }

    #[test]
    fn single_item_combination_is_identity() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let v = rand_block(&mut r);
        let t = pair_tag_gen(&v, 3, FID, sk, pk).unwrap();
        let u = PairVector::unit(v, 3);
        let (w, tc) = pair_combine(&[(u.clone(), t.clone(), Scalar::one())], pk).unwrap();
        assert_eq!(w, u);
        assert_eq!(tc, t);
    }

    #[test]
    fn homomorphic_combination_verifies() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        for l in [2usize, 3, 7] {
            let items = random_items(l, &mut r);
            let (w, t) = pair_combine(&items, pk).unwrap();
            assert!(pair_verify(&w, &t, FID, pk), "l={l}");
            assert!(pair_verify_secret(&w, &t, FID, sk, pk), "l={l}");
        }
    }

    #[test]
    fn all_zero_coefficients_give_degenerate_pass() {
        let (pk, _) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let mut items = random_items(3, &mut r);
        for it in &mut items {
            it.2 = Scalar::zero();
        }
        let (w, t) = pair_combine(&items, pk).unwrap();
        assert!(w.data.iter().all(|s| *s == Scalar::zero()));
        assert!(w.coeffs.values().all(|s| *s == Scalar::zero()));
        assert_eq!(t.t, G1Projective::identity());
        assert!(pair_verify(&w, &t, FID, pk));
    }

    #[test]
    fn tampered_pairs_rejected() {
        let (pk, _) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let items = random_items(3, &mut r);
        let (w, t) = pair_combine(&items, pk).unwrap();

        let forged = SncPairTag {
            t: t.t + rand_g1(&mut r),
        };
        assert!(!pair_verify(&w, &forged, FID, pk));

        let mut w2 = w.clone();
        w2.data[0] += Scalar::one();
        assert!(!pair_verify(&w2, &t, FID, pk));

        let mut w3 = w.clone();
        let k = *w3.coeffs.keys().next().unwrap();
        let bumped = w3.coeffs[&k] + Scalar::one();
        w3.coeffs.insert(k, bumped);
        assert!(!pair_verify(&w3, &t, FID, pk));
    }

    #[test]
    fn algebraic_chain_holds_on_random_instances() {
        // e(t, h) expands to e(prod H^{w_coeff} prod g^{w_data}, z); check
        // the identity for random combinations and sizes.
        let (pk, _) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(7);
        for round in 0..200 {
            let items = random_items(round % 4 + 1, &mut r);
            let (w, t) = pair_combine(&items, pk).unwrap();
            assert!(pair_verify(&w, &t, FID, pk), "round {round}");
        }
    }

    #[test]
    fn encodings_round_trip() {
        let (pk, sk) = fixture();
        let mut r = ChaCha8Rng::seed_from_u64(8);
        assert_eq!(SncPairPublicKey::decode(&pk.encode()).unwrap(), *pk);
        assert_eq!(SncPairSecret::decode(&sk.encode()).unwrap(), *sk);
        let v = rand_block(&mut r);
        let t = pair_tag_gen(&v, 1, FID, sk, pk).unwrap();
        assert_eq!(SncPairTag::decode(&t.encode()).unwrap(), t);
    }

    #[test]
    fn foreign_suite_in_key_file_rejected() {
        let (pk, _) = fixture();
        let mut alt = pk.clone();
        alt.suite.curve_id = "BN254".into();
        assert!(SncPairPublicKey::decode(&alt.encode()).is_err());
    }
}
