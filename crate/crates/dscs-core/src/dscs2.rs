//! The append-only provable-storage protocol: pairing-based tags,
//! constant-size keys and proofs, no freshness structure.
//!
//! Every block index is bound into its tag through H(fid || i), so the
//! order of blocks is fixed forever — the only supported mutation is
//! appending at position m+1. There is no VerifyUpdate round: the
//! client tracks m locally and a server that mis-applies an append is
//! caught at the next audit.

use bls12_381::Scalar;
use num_bigint::BigUint;
use rand::Rng;

use crate::crypto::pairing::{rand_scalar, scalar_from_be_bytes, scalar_to_bytes};
use crate::error::{Error, Result};
use crate::profile::SecurityProfile;
use crate::snc_pairing::{
    pair_combine, pair_gen_keys, pair_tag_gen, pair_verify, pair_verify_secret, PairVector,
    SncPairPublicKey, SncPairSecret, SncPairTag,
};
use crate::wire::{put_bytes, put_u64, put_vec, Cursor};

#[derive(Debug, Clone)]
pub struct ClientStateII {
    pub profile: SecurityProfile,
    pub sk: SncPairSecret,
    pub pk: SncPairPublicKey,
    /// Random λ-bit file identifier.
    pub fid: Vec<u8>,
    /// Client-tracked block count; the server must agree after every
    /// committed append.
    pub m: usize,
}

pub fn keygen2(profile: &SecurityProfile, n: usize, rng: &mut impl Rng) -> ClientStateII {
    let (pk, sk) = pair_gen_keys(n, rng);
    let mut fid = vec![0u8; profile.lambda / 8];
    rng.fill_bytes(&mut fid);
    ClientStateII {
        profile: *profile,
        sk,
        pk,
        fid,
        m: 0,
    }
}

/// File bytes to scalar blocks, reusing the padded segment layout of
/// the RSA protocol; segments are far below the group order so the
/// lift is exact and reversible.
pub fn file_to_blocks2(file: &[u8], n: usize, seg_bytes: usize) -> Vec<Vec<Scalar>> {
    crate::dscs1::file_to_blocks(file, n, seg_bytes)
        .into_iter()
        .map(|b| {
            b.into_iter()
                .map(|v| scalar_from_be_bytes(&v.to_bytes_be()))
                .collect()
        })
        .collect()
}

pub fn blocks_to_file2(blocks: &[Vec<Scalar>], seg_bytes: usize) -> Result<Vec<u8>> {
    let as_ints: Vec<Vec<BigUint>> = blocks
        .iter()
        .map(|b| {
            b.iter()
                .map(|s| {
                    // Canonical little-endian scalar bytes, reversed.
                    let mut raw = scalar_to_bytes(s);
                    raw.reverse();
                    BigUint::from_bytes_be(&raw)
                })
                .collect()
        })
        .collect();
    crate::dscs1::blocks_to_file(&as_ints, seg_bytes)
}

#[derive(Debug, Clone)]
pub struct OutsourceBundle2 {
    pub blocks: Vec<Vec<Scalar>>,
    pub tags: Vec<SncPairTag>,
}

pub fn outsource2(
    state: &mut ClientStateII,
    file: &[u8],
) -> Result<OutsourceBundle2> {
    let blocks = file_to_blocks2(file, state.pk.n(), state.profile.segment_bytes());
    let mut tags = Vec::with_capacity(blocks.len());
    for (idx, v) in blocks.iter().enumerate() {
        tags.push(pair_tag_gen(v, idx + 1, &state.fid, &state.sk, &state.pk)?);
    }
    state.m = blocks.len();
    Ok(OutsourceBundle2 { blocks, tags })
}

/// The append message {v', t'}; the server stores both at position m+1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppendRequest {
    pub block: Vec<Scalar>,
    pub tag: SncPairTag,
}

impl AppendRequest {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_vec(&mut out, &self.block, |o, s| {
            put_bytes(o, &scalar_to_bytes(s))
        });
        out.extend_from_slice(&self.tag.encode());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let k = c.get_count()?;
        let mut block = Vec::with_capacity(k);
        for _ in 0..k {
            block.push(crate::crypto::pairing::scalar_from_bytes(c.get_bytes()?)?);
        }
        let tag = SncPairTag::decode(c.take(c.remaining())?)?;
        Ok(AppendRequest { block, tag })
    }
}

/// Place a block at position i (1-based). Anything but i = m+1 is
/// rejected: this protocol supports appends only.
pub fn request_insert(
    state: &mut ClientStateII,
    i: usize,
    block: &[Scalar],
) -> Result<AppendRequest> {
    if i != state.m + 1 {
        return Err(Error::AppendOnly);
    }
    let tag = pair_tag_gen(block, i, &state.fid, &state.sk, &state.pk)?;
    state.m += 1;
    Ok(AppendRequest {
        block: block.to_vec(),
        tag,
    })
}

pub fn append(state: &mut ClientStateII, block: &[Scalar]) -> Result<AppendRequest> {
    request_insert(state, state.m + 1, block)
}

/// In-memory server-side record of one outsourced file.
#[derive(Debug, Clone)]
pub struct ServerFileII {
    pub pk: SncPairPublicKey,
    pub fid: Vec<u8>,
    pub blocks: Vec<Vec<Scalar>>,
    pub tags: Vec<SncPairTag>,
}

impl ServerFileII {
    pub fn ingest(pk: SncPairPublicKey, fid: Vec<u8>, bundle: OutsourceBundle2) -> Result<Self> {
        if bundle.blocks.len() != bundle.tags.len() {
            return Err(Error::LengthMismatch);
        }
        Ok(ServerFileII {
            pk,
            fid,
            blocks: bundle.blocks,
            tags: bundle.tags,
        })
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    pub fn apply_append(&mut self, req: &AppendRequest) {
        self.blocks.push(req.block.clone());
        self.tags.push(req.tag.clone());
    }

    pub fn auth_read2(&self, i: usize) -> Result<(Vec<Scalar>, SncPairTag)> {
        if i < 1 || i > self.m() {
            return Err(Error::IndexOutOfRange(i));
        }
        Ok((self.blocks[i - 1].clone(), self.tags[i - 1].clone()))
    }

    pub fn prove2(&self, ch: &ChallengeII) -> Result<StorageProofII> {
        let mut items = Vec::with_capacity(ch.pairs.len());
        for (i, nu) in &ch.pairs {
            if *i < 1 || *i > self.m() {
                return Err(Error::IndexOutOfRange(*i));
            }
            items.push((
                PairVector::unit(self.blocks[*i - 1].clone(), *i),
                self.tags[*i - 1].clone(),
                *nu,
            ));
        }
        let (w, t) = pair_combine(&items, &self.pk)?;
        Ok(StorageProofII { y: w.data, t })
    }
}

/// Owner-side read check, directly against the secret key.
pub fn verify_read2_secret(
    state: &ClientStateII,
    i: usize,
    block: &[Scalar],
    tag: &SncPairTag,
) -> bool {
    if i < 1 || i > state.m {
        return false;
    }
    pair_verify_secret(
        &PairVector::unit(block.to_vec(), i),
        tag,
        &state.fid,
        &state.sk,
        &state.pk,
    )
}

/// Auditor-side read check via the pairing; public key only.
pub fn verify_read2(
    pk: &SncPairPublicKey,
    fid: &[u8],
    i: usize,
    block: &[Scalar],
    tag: &SncPairTag,
) -> bool {
    i >= 1 && pair_verify(&PairVector::unit(block.to_vec(), i), tag, fid, pk)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeII {
    pub pairs: Vec<(usize, Scalar)>,
}

impl ChallengeII {
    pub fn l(&self) -> usize {
        self.pairs.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_vec(&mut out, &self.pairs, |o, (i, nu)| {
            put_u64(o, *i as u64);
            put_bytes(o, &scalar_to_bytes(nu));
        });
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let k = c.get_count()?;
        let mut pairs = Vec::with_capacity(k);
        for _ in 0..k {
            let i = c.get_u64()? as usize;
            pairs.push((i, crate::crypto::pairing::scalar_from_bytes(c.get_bytes()?)?));
        }
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after challenge"));
        }
        Ok(ChallengeII { pairs })
    }
}

pub fn challenge2(m: usize, l: usize, rng: &mut impl Rng) -> Result<ChallengeII> {
    if l < 1 || l > m {
        return Err(Error::BadCardinality);
    }
    let idx = rand::seq::index::sample(rng, m, l);
    let pairs = idx.iter().map(|i| (i + 1, rand_scalar(rng))).collect();
    Ok(ChallengeII { pairs })
}

/// Constant-size storage proof: n scalars plus one group element,
/// independent of m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageProofII {
    pub y: Vec<Scalar>,
    pub t: SncPairTag,
}

impl StorageProofII {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_vec(&mut out, &self.y, |o, s| put_bytes(o, &scalar_to_bytes(s)));
        out.extend_from_slice(&self.t.encode());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let k = c.get_count()?;
        let mut y = Vec::with_capacity(k);
        for _ in 0..k {
            y.push(crate::crypto::pairing::scalar_from_bytes(c.get_bytes()?)?);
        }
        let t = SncPairTag::decode(c.take(c.remaining())?)?;
        Ok(StorageProofII { y, t })
    }
}

/// Public audit check: reconstruct w from the challenge coefficients
/// and test the pairing equation.
pub fn verify_audit2(
    pk: &SncPairPublicKey,
    fid: &[u8],
    ch: &ChallengeII,
    proof: &StorageProofII,
) -> bool {
    if proof.y.len() != pk.n() {
        return false;
    }
    let w = PairVector {
        data: proof.y.clone(),
        coeffs: ch.pairs.iter().map(|(i, nu)| (*i, *nu)).collect(),
    };
    pair_verify(&w, &proof.t, fid, pk)
}
