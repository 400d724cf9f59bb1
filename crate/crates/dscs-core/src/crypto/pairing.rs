//! Bilinear-group primitives over BLS12-381.
//!
//! The suite descriptor (curve id + hash-to-group method id) travels in
//! the public-key header so client and server agree on the group and the
//! hash-to-G1 construction byte for byte.

use bls12_381::hash_to_curve::{ExpandMsgXmd, HashToCurve};
use bls12_381::{
    pairing, G1Affine, G1Projective, G2Affine, G2Projective, Gt, Scalar,
};
use rand::RngCore;
use sha2_v09::Sha256;

use crate::error::{Error, Result};

/// Identifies the group arithmetic and the hash-to-G1 method. Only one
/// suite is implemented; the descriptor exists so encodings stay
/// self-describing.
pub const CURVE_ID: &str = "BLS12-381";
pub const HASH_TO_GROUP_ID: &str = "XMD:SHA-256_SSWU_RO";
const DST: &[u8] = b"DSCS-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";

pub const G1_COMPRESSED_LEN: usize = 48;
pub const G2_COMPRESSED_LEN: usize = 96;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilinearSuite {
    pub curve_id: String,
    pub hash_to_group_id: String,
}

impl Default for BilinearSuite {
    fn default() -> Self {
        BilinearSuite {
            curve_id: CURVE_ID.to_string(),
            hash_to_group_id: HASH_TO_GROUP_ID.to_string(),
        }
    }
}

impl BilinearSuite {
    /// Rejects descriptors produced by an incompatible implementation.
    pub fn check_supported(&self) -> Result<()> {
        if self.curve_id != CURVE_ID || self.hash_to_group_id != HASH_TO_GROUP_ID {
            return Err(Error::Malformed("unsupported bilinear suite"));
        }
        Ok(())
    }

    pub fn pair(&self, u: &G1Projective, v: &G2Projective) -> Gt {
        pairing(&G1Affine::from(u), &G2Affine::from(v))
    }
}

/// Domain-separated hash of (fid, index) onto G1. The index is framed as
/// 8 big-endian bytes after the fid so distinct pairs never collide.
pub fn hash_to_g1(fid: &[u8], index: u64) -> G1Projective {
    let mut msg = Vec::with_capacity(fid.len() + 12);
    msg.extend_from_slice(&(fid.len() as u32).to_be_bytes());
    msg.extend_from_slice(fid);
    msg.extend_from_slice(&index.to_be_bytes());
    <G1Projective as HashToCurve<ExpandMsgXmd<Sha256>>>::hash_to_curve(&msg, DST)
}

/// Uniform nonzero scalar.
pub fn rand_scalar(rng: &mut impl RngCore) -> Scalar {
    loop {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        let s = Scalar::from_bytes_wide(&wide);
        if s != Scalar::zero() {
            return s;
        }
    }
}

pub fn rand_g1(rng: &mut impl RngCore) -> G1Projective {
    G1Projective::generator() * rand_scalar(rng)
}

pub fn rand_g2(rng: &mut impl RngCore) -> G2Projective {
    G2Projective::generator() * rand_scalar(rng)
}

pub fn g1_to_bytes(p: &G1Projective) -> Vec<u8> {
    G1Affine::from(p).to_compressed().to_vec()
}

pub fn g1_from_bytes(b: &[u8]) -> Result<G1Projective> {
    let arr: [u8; G1_COMPRESSED_LEN] = b
        .try_into()
        .map_err(|_| Error::Malformed("bad G1 encoding length"))?;
    let a: Option<G1Affine> = G1Affine::from_compressed(&arr).into();
    a.map(G1Projective::from)
        .ok_or(Error::Malformed("invalid G1 point"))
}

pub fn g2_to_bytes(p: &G2Projective) -> Vec<u8> {
    G2Affine::from(p).to_compressed().to_vec()
}

pub fn g2_from_bytes(b: &[u8]) -> Result<G2Projective> {
    let arr: [u8; G2_COMPRESSED_LEN] = b
        .try_into()
        .map_err(|_| Error::Malformed("bad G2 encoding length"))?;
    let a: Option<G2Affine> = G2Affine::from_compressed(&arr).into();
    a.map(G2Projective::from)
        .ok_or(Error::Malformed("invalid G2 point"))
}

pub fn scalar_to_bytes(s: &Scalar) -> Vec<u8> {
    s.to_bytes().to_vec()
}

pub fn scalar_from_bytes(b: &[u8]) -> Result<Scalar> {
    let arr: [u8; 32] = b
        .try_into()
        .map_err(|_| Error::Malformed("bad scalar encoding length"))?;
    let s: Option<Scalar> = Scalar::from_bytes(&arr).into();
    s.ok_or(Error::Malformed("scalar out of field"))
}

/// Scalar reduced from a big-endian byte string (used to lift F_e field
/// elements and coefficients into the pairing scalar field).
pub fn scalar_from_be_bytes(b: &[u8]) -> Scalar {
    let mut wide = [0u8; 64];
    let n = b.len().min(64);
    // from_bytes_wide takes little-endian.
    for (i, &byte) in b[b.len() - n..].iter().rev().enumerate() {
        wide[i] = byte;
    }
    Scalar::from_bytes_wide(&wide)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    #[test]
    fn bilinearity_on_random_samples() {
        let mut r = rng();
        let suite = BilinearSuite::default();
        for _ in 0..100 {
            let u = rand_g1(&mut r);
            let v = rand_g2(&mut r);
            let a = rand_scalar(&mut r);
            let b = rand_scalar(&mut r);
            assert_eq!(suite.pair(&(u * a), &(v * b)), suite.pair(&u, &v) * (a * b));
        }
    }

    #[test]
    fn hash_to_g1_is_deterministic_and_separating() {
        let p = hash_to_g1(b"file-1", 3);
        assert_eq!(p, hash_to_g1(b"file-1", 3));
        assert_ne!(p, hash_to_g1(b"file-1", 4));
        assert_ne!(p, hash_to_g1(b"file-2", 3));
        // Length framing: ("ab", index of "c"...) style splices must differ.
        assert_ne!(hash_to_g1(b"ab", 0x63), hash_to_g1(b"abc", 0x63));
    }

    #[test]
    fn hash_output_is_in_subgroup() {
        // Group membership oracle: compressed decode enforces subgroup
        // membership in this backend.
        for i in 0..16 {
            let p = hash_to_g1(b"member", i);
            let rt = g1_from_bytes(&g1_to_bytes(&p)).unwrap();
            assert_eq!(rt, p);
        }
    }

    #[test]
    fn point_encodings_round_trip() {
        let mut r = rng();
        for _ in 0..20 {
            let p = rand_g1(&mut r);
            assert_eq!(g1_from_bytes(&g1_to_bytes(&p)).unwrap(), p);
            let q = rand_g2(&mut r);
            assert_eq!(g2_from_bytes(&g2_to_bytes(&q)).unwrap(), q);
            let s = rand_scalar(&mut r);
            assert_eq!(scalar_from_bytes(&scalar_to_bytes(&s)).unwrap(), s);
        }
    }

    #[test]
    fn invalid_point_rejected() {
        assert!(g1_from_bytes(&[0xffu8; G1_COMPRESSED_LEN]).is_err());
        assert!(g1_from_bytes(&[0u8; 5]).is_err());
    }

    #[test]
    fn be_scalar_lift_matches_small_integers() {
        assert_eq!(scalar_from_be_bytes(&[0, 1, 0]), Scalar::from(256u64));
        assert_eq!(scalar_from_be_bytes(&[]), Scalar::zero());
    }

    #[test]
    fn foreign_suite_descriptor_rejected() {
        let s = BilinearSuite {
            curve_id: "BN254".into(),
            hash_to_group_id: HASH_TO_GROUP_ID.into(),
        };
        assert!(s.check_supported().is_err());
    }
}
