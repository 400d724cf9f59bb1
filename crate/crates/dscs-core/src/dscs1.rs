//! The dynamic provable-storage protocol: RSA homomorphic tags bound to
//! a rank-based authenticated skip list.
//!
//! The client keeps only the key material and the list metadata d_M.
//! The server stores blocks, tags, the h-list and the skip list, and
//! answers reads, audits and updates. Every server response carries
//! enough proof material for the client to check it against d_M alone;
//! audits are publicly verifiable from the public key.
//!
//! Update flow (three messages, atomic on the client):
//!   1. client reads the anchor path (and the victim path for delete),
//!      predicts the post-update d_M' and sends the update request;
//!   2. server applies the update and returns a read of the affected
//!      position in the new structure;
//!   3. client verifies it against the prediction and commits
//!      (m, d_M, h-list) or rolls all three back.

use num_bigint::{BigUint, RandBigInt};
use num_traits::Zero;
use rand::Rng;

use crate::crypto::rsa::{mod_inverse, rand_unit, RsaTrapdoor};
use crate::error::{Error, Result};
use crate::profile::SecurityProfile;
use crate::skiplist::{
    list_init_update, list_verify_read, verify_read_response, Metadata, ReadResponse, SkipList,
    SkipListProof, UpdateType,
};
use crate::snc_rsa::{
    combine, gen_keys, tag_gen, tag_gen_with_h, verify_single, AugmentedVector, SncRsaPublicKey,
    SncRsaTag,
};
use crate::wire::{put_int, put_u32, put_u64, put_vec, Cursor};

/// Everything a verifier needs: the tag public key plus the current
/// list metadata (None until the file is outsourced).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKeyI {
    pub snc: SncRsaPublicKey,
    pub metadata: Option<Metadata>,
    pub level_cap: u8,
}

impl PublicKeyI {
    pub fn m(&self) -> usize {
        self.snc.m()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, 1);
        out.push(self.level_cap);
        match &self.metadata {
            Some(md) => {
                out.push(1);
                out.extend_from_slice(&md.encode());
            }
            None => out.push(0),
        }
        out.extend_from_slice(&self.snc.encode());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        if c.get_u32()? != 1 {
            return Err(Error::Malformed("unknown public key version"));
        }
        let level_cap = c.get_u8()?;
        let metadata = match c.get_u8()? {
            0 => None,
            1 => Some(Metadata::decode(c.take(40)?)?),
            _ => return Err(Error::Malformed("bad metadata flag")),
        };
        let snc = SncRsaPublicKey::decode(c.take(c.remaining())?)?;
        Ok(PublicKeyI {
            snc,
            metadata,
            level_cap,
        })
    }
}

#[derive(Debug, Clone)]
struct PendingUpdate {
    i: usize,
    updtype: UpdateType,
    expected: Metadata,
    new_element: Option<Vec<u8>>,
    prior_anchor_element: Option<Vec<u8>>,
    new_h: Option<BigUint>,
}

/// Data-owner state: trapdoor plus the public key. `pending` holds the
/// predicted metadata of an in-flight update until it commits or rolls
/// back.
#[derive(Debug, Clone)]
pub struct ClientStateI {
    pub profile: SecurityProfile,
    pub trapdoor: RsaTrapdoor,
    pub pk: PublicKeyI,
    pending: Option<PendingUpdate>,
}

impl ClientStateI {
    /// Reassemble a client state from persisted parts (key-file load).
    /// Any in-flight update is considered abandoned.
    pub fn from_parts(profile: SecurityProfile, trapdoor: RsaTrapdoor, pk: PublicKeyI) -> Self {
        ClientStateI {
            profile,
            trapdoor,
            pk,
            pending: None,
        }
    }
}

pub fn keygen(
    profile: &SecurityProfile,
    m: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<ClientStateI> {
    let (snc, trapdoor) = gen_keys(profile, m, n, rng)?;
    Ok(ClientStateI {
        profile: *profile,
        trapdoor,
        pk: PublicKeyI {
            snc,
            metadata: None,
            level_cap: profile.level_cap,
        },
        pending: None,
    })
}

/// Split a byte string into blocks of n segments. A length header is
/// prepended so zero padding is reversible; segments are little
/// file chunks of `seg_bytes` bytes, so they always lie below e.
pub fn file_to_blocks(file: &[u8], n: usize, seg_bytes: usize) -> Vec<Vec<BigUint>> {
    let mut data = Vec::with_capacity(8 + file.len());
    put_u64(&mut data, file.len() as u64);
    data.extend_from_slice(file);
    let block_bytes = n * seg_bytes;
    let padded = data.len().div_ceil(block_bytes).max(1) * block_bytes;
    data.resize(padded, 0);
    data.chunks(block_bytes)
        .map(|b| {
            b.chunks(seg_bytes)
                .map(BigUint::from_bytes_be)
                .collect()
        })
        .collect()
}

pub fn blocks_to_file(blocks: &[Vec<BigUint>], seg_bytes: usize) -> Result<Vec<u8>> {
    let mut data = Vec::new();
    for b in blocks {
        for s in b {
            let raw = s.to_bytes_be();
            if raw.len() > seg_bytes {
                return Err(Error::Malformed("segment wider than profile"));
            }
            data.resize(data.len() + seg_bytes - raw.len(), 0);
            data.extend_from_slice(&raw);
        }
    }
    let mut c = Cursor::new(&data);
    let len = c.get_u64()? as usize;
    if len > c.remaining() {
        return Err(Error::Malformed("length header exceeds payload"));
    }
    Ok(c.take(len)?.to_vec())
}

/// The upload bundle sent to the server at outsourcing time.
#[derive(Debug, Clone)]
pub struct OutsourceBundle {
    pub blocks: Vec<Vec<BigUint>>,
    pub tags: Vec<SncRsaTag>,
}

/// Partition the file, tag every block, build the skip list over the
/// serialized tags and anchor its metadata in the public key. Adjusts
/// the h-list length when the file does not fill the keygen-time m.
pub fn outsource(
    state: &mut ClientStateI,
    file: &[u8],
    rng: &mut impl Rng,
) -> Result<OutsourceBundle> {
    let n = state.pk.snc.n();
    let blocks = file_to_blocks(file, n, state.profile.segment_bytes());
    let m = blocks.len();
    let modulus = state.pk.snc.modulus.clone();
    while state.pk.snc.h_list.len() < m {
        let h = rand_unit(&modulus, rng);
        state.pk.snc.h_list.push(h);
    }
    state.pk.snc.h_list.truncate(m);

    let mut tags = Vec::with_capacity(m);
    for (idx, v) in blocks.iter().enumerate() {
        tags.push(tag_gen(v, idx + 1, &state.trapdoor, &state.pk.snc, rng)?);
    }
    let list = SkipList::init(tags.iter().map(|t| t.encode()).collect(), state.pk.level_cap);
    state.pk.metadata = Some(list.metadata());
    state.pending = None;
    Ok(OutsourceBundle { blocks, tags })
}

/// In-memory server-side record of one outsourced file. The persistent
/// server wraps this with storage and locking.
#[derive(Debug, Clone)]
pub struct ServerFileI {
    pub pk: SncRsaPublicKey,
    pub blocks: Vec<Vec<BigUint>>,
    pub tags: Vec<SncRsaTag>,
    pub list: SkipList,
}

impl ServerFileI {
    pub fn ingest(pk: SncRsaPublicKey, bundle: OutsourceBundle, level_cap: u8) -> Result<Self> {
        if bundle.blocks.len() != bundle.tags.len() || bundle.blocks.len() != pk.m() {
            return Err(Error::LengthMismatch);
        }
        let list = SkipList::init(bundle.tags.iter().map(|t| t.encode()).collect(), level_cap);
        Ok(ServerFileI {
            pk,
            blocks: bundle.blocks,
            tags: bundle.tags,
            list,
        })
    }

    pub fn m(&self) -> usize {
        self.blocks.len()
    }

    /// Serve a block read with its tag and list proof.
    pub fn auth_read(&self, i: usize) -> Result<(Vec<BigUint>, SncRsaTag, ReadResponse)> {
        if i < 1 || i > self.m() {
            return Err(Error::IndexOutOfRange(i));
        }
        Ok((
            self.blocks[i - 1].clone(),
            self.tags[i - 1].clone(),
            self.list.read_response(i)?,
        ))
    }

    /// Path read for update anchoring; position 0 is the sentinel.
    pub fn path_read(&self, pos: usize) -> Result<ReadResponse> {
        self.list.read_response(pos)
    }

    pub fn prove(&self, ch: &ChallengeI) -> Result<StorageProofI> {
        let mut items = Vec::with_capacity(ch.pairs.len());
        let mut t2 = Vec::with_capacity(ch.pairs.len());
        for (i, nu) in &ch.pairs {
            if *i < 1 || *i > self.m() {
                return Err(Error::IndexOutOfRange(*i));
            }
            items.push((
                AugmentedVector::unit(self.blocks[*i - 1].clone(), *i),
                self.tags[*i - 1].clone(),
                nu.clone(),
            ));
            t2.push((self.tags[*i - 1].clone(), self.list.path_proof(*i)?));
        }
        let (w, t) = combine(&items, &self.pk)?;
        Ok(StorageProofI { y: w.data, t, t2 })
    }

    /// Apply a verified-on-the-client update request and return the
    /// post-update read the client expects.
    pub fn apply_update(&mut self, req: &UpdateRequestI) -> Result<ReadResponse> {
        match req.updtype {
            UpdateType::Insert => {
                let block = req.block.clone().ok_or(Error::Malformed("insert without block"))?;
                let tag = req.tag.clone().ok_or(Error::Malformed("insert without tag"))?;
                let h = req.new_h.clone().ok_or(Error::Malformed("insert without h"))?;
                if req.i > self.m() {
                    return Err(Error::IndexOutOfRange(req.i));
                }
                let resp = self
                    .list
                    .perform_update(req.i, UpdateType::Insert, Some(&tag.encode()))?;
                self.blocks.insert(req.i, block);
                self.tags.insert(req.i, tag);
                self.pk.h_list.insert(req.i, h);
                Ok(resp)
            }
            UpdateType::Modify => {
                let block = req.block.clone().ok_or(Error::Malformed("modify without block"))?;
                let tag = req.tag.clone().ok_or(Error::Malformed("modify without tag"))?;
                if req.i < 1 || req.i > self.m() {
                    return Err(Error::IndexOutOfRange(req.i));
                }
                let resp = self
                    .list
                    .perform_update(req.i, UpdateType::Modify, Some(&tag.encode()))?;
                self.blocks[req.i - 1] = block;
                self.tags[req.i - 1] = tag;
                Ok(resp)
            }
            UpdateType::Delete => {
                if req.i < 1 || req.i > self.m() {
                    return Err(Error::IndexOutOfRange(req.i));
                }
                let resp = self.list.perform_update(req.i, UpdateType::Delete, None)?;
                self.blocks.remove(req.i - 1);
                self.tags.remove(req.i - 1);
                self.pk.h_list.remove(req.i - 1);
                Ok(resp)
            }
        }
    }
}

/// Verify a served read: the list proof must bind the tag at position i
/// under d_M and the tag must bind the block content.
pub fn verify_read(
    pk: &PublicKeyI,
    i: usize,
    block: &[BigUint],
    tag: &SncRsaTag,
    resp: &ReadResponse,
) -> bool {
    let Some(md) = &pk.metadata else { return false };
    resp.element.as_deref() == Some(tag.encode()).as_deref()
        && verify_read_response(i, md, resp)
        && verify_single(block, i, tag, &pk.snc)
}

/// The client's update request as it travels to the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateRequestI {
    pub i: usize,
    pub updtype: UpdateType,
    pub block: Option<Vec<BigUint>>,
    pub tag: Option<SncRsaTag>,
    pub new_h: Option<BigUint>,
}

impl UpdateRequestI {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(match self.updtype {
            UpdateType::Insert => 1,
            UpdateType::Modify => 2,
            UpdateType::Delete => 3,
        });
        put_u64(&mut out, self.i as u64);
        match &self.block {
            Some(b) => {
                out.push(1);
                put_vec(&mut out, b, |o, v| put_int(o, v));
            }
            None => out.push(0),
        }
        match &self.tag {
            Some(t) => {
                out.push(1);
                out.extend_from_slice(&t.encode());
            }
            None => out.push(0),
        }
        match &self.new_h {
            Some(h) => {
                out.push(1);
                put_int(&mut out, h);
            }
            None => out.push(0),
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let updtype = match c.get_u8()? {
            1 => UpdateType::Insert,
            2 => UpdateType::Modify,
            3 => UpdateType::Delete,
            _ => return Err(Error::Malformed("bad update type")),
        };
        let i = c.get_u64()? as usize;
        let block = if c.get_u8()? == 1 {
            let k = c.get_count()?;
            let mut b = Vec::with_capacity(k);
            for _ in 0..k {
                b.push(c.get_int()?);
            }
            Some(b)
        } else {
            None
        };
        let tag = if c.get_u8()? == 1 {
            Some(SncRsaTag {
                s: c.get_int()?,
                x: c.get_int()?,
            })
        } else {
            None
        };
        let new_h = if c.get_u8()? == 1 { Some(c.get_int()?) } else { None };
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after update request"));
        }
        Ok(UpdateRequestI {
            i,
            updtype,
            block,
            tag,
            new_h,
        })
    }
}

/// Start an update. `anchor` is the server's read of position i
/// (insert/modify) or i−1 (delete); delete additionally needs the read
/// of i itself (`victim`). Both are verified against the current d_M;
/// a failing proof aborts with StaleProof before anything is sent.
pub fn init_update(
    state: &mut ClientStateI,
    i: usize,
    updtype: UpdateType,
    new_block: Option<&[BigUint]>,
    anchor: &ReadResponse,
    victim: Option<&ReadResponse>,
    rng: &mut impl Rng,
) -> Result<UpdateRequestI> {
    let md = state.pk.metadata.ok_or(Error::Malformed("no outsourced file"))?;
    let (tag, new_h) = match updtype {
        UpdateType::Insert => {
            let v = new_block.ok_or(Error::Malformed("insert without block"))?;
            let h = rand_unit(&state.pk.snc.modulus, rng);
            let t = tag_gen_with_h(v, &h, &state.trapdoor, &state.pk.snc, rng)?;
            (Some(t), Some(h))
        }
        UpdateType::Modify => {
            let v = new_block.ok_or(Error::Malformed("modify without block"))?;
            // Fresh s every time, so the old tag dies at the list layer.
            let t = tag_gen(v, i, &state.trapdoor, &state.pk.snc, rng)?;
            (Some(t), None)
        }
        UpdateType::Delete => (None, None),
    };
    let new_element = tag.as_ref().map(|t| t.encode());
    let expected = list_init_update(
        i,
        updtype,
        &md,
        new_element.as_deref(),
        anchor,
        victim,
        state.pk.level_cap,
    )?;
    state.pending = Some(PendingUpdate {
        i,
        updtype,
        expected,
        new_element,
        prior_anchor_element: anchor.element.clone(),
        new_h: new_h.clone(),
    });
    Ok(UpdateRequestI {
        i,
        updtype,
        block: new_block.map(<[BigUint]>::to_vec),
        tag,
        new_h,
    })
}

/// Finish an update: check the server's post-update read against the
/// prediction. On success m, d_M and the h-list commit together; on
/// failure all three stay at their pre-update values.
pub fn verify_update(state: &mut ClientStateI, response: &ReadResponse) -> bool {
    let Some(p) = state.pending.take() else { return false };
    let ok = crate::skiplist::list_verify_update(
        p.i,
        p.updtype,
        p.new_element.as_deref(),
        p.prior_anchor_element.as_deref(),
        &p.expected,
        response,
    );
    if !ok {
        return false;
    }
    match p.updtype {
        UpdateType::Insert => {
            state.pk.snc.h_list.insert(p.i, p.new_h.expect("insert carries h"));
        }
        UpdateType::Modify => {}
        UpdateType::Delete => {
            state.pk.snc.h_list.remove(p.i - 1);
        }
    }
    state.pk.metadata = Some(p.expected);
    true
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeI {
    /// (block index, coefficient) pairs; indices distinct, 1-based.
    pub pairs: Vec<(usize, BigUint)>,
}

impl ChallengeI {
    pub fn l(&self) -> usize {
        self.pairs.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_vec(&mut out, &self.pairs, |o, (i, nu)| {
            put_u64(o, *i as u64);
            put_int(o, nu);
        });
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let k = c.get_count()?;
        let mut pairs = Vec::with_capacity(k);
        for _ in 0..k {
            let i = c.get_u64()? as usize;
            pairs.push((i, c.get_int()?));
        }
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after challenge"));
        }
        Ok(ChallengeI { pairs })
    }
}

/// Sample l distinct indices from [1,m] with uniform F_e coefficients.
pub fn challenge(pk: &PublicKeyI, l: usize, rng: &mut impl Rng) -> Result<ChallengeI> {
    let m = pk.m();
    if l < 1 || l > m {
        return Err(Error::BadCardinality);
    }
    let idx = rand::seq::index::sample(rng, m, l);
    let pairs = idx
        .iter()
        .map(|i| (i + 1, rng.gen_biguint_below(&pk.snc.e)))
        .collect();
    Ok(ChallengeI { pairs })
}

/// T1 = combined (y, tag); T2 = per-challenged-index (tag, list proof).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageProofI {
    pub y: Vec<BigUint>,
    pub t: SncRsaTag,
    pub t2: Vec<(SncRsaTag, SkipListProof)>,
}

impl StorageProofI {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_vec(&mut out, &self.y, |o, v| put_int(o, v));
        out.extend_from_slice(&self.t.encode());
        put_vec(&mut out, &self.t2, |o, (tag, proof)| {
            o.extend_from_slice(&tag.encode());
            o.extend_from_slice(&proof.encode());
        });
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let k = c.get_count()?;
        let mut y = Vec::with_capacity(k);
        for _ in 0..k {
            y.push(c.get_int()?);
        }
        let t = SncRsaTag {
            s: c.get_int()?,
            x: c.get_int()?,
        };
        let l = c.get_count()?;
        let mut t2 = Vec::with_capacity(l);
        for _ in 0..l {
            let tag = SncRsaTag {
                s: c.get_int()?,
                x: c.get_int()?,
            };
            let proof = SkipListProof::read_from(&mut c)?;
            t2.push((tag, proof));
        }
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after proof"));
        }
        Ok(StorageProofI { y, t, t2 })
    }
}

/// Public audit check. Three gates, all required:
///   (a) every challenged tag is fresh under d_M (list proofs),
///   (b) the combined mask matches: T1.s = sum nu_i s_i mod e,
///   (c) the homomorphic equation holds for the reconstructed vector
///       (challenged coefficient slots carry nu_i, the rest are zero).
/// Consumes the public key only; no trapdoor anywhere.
pub fn verify_audit(pk: &PublicKeyI, ch: &ChallengeI, proof: &StorageProofI) -> bool {
    let Some(md) = &pk.metadata else { return false };
    if proof.t2.len() != ch.pairs.len()
        || proof.y.len() != pk.snc.n()
        || proof.y.iter().any(|v| v >= &pk.snc.e)
        || proof.t.s >= pk.snc.e
    {
        return false;
    }
    let mut s_bar = BigUint::zero();
    for ((i, nu), (tag, list_proof)) in ch.pairs.iter().zip(&proof.t2) {
        if !list_verify_read(*i, md, &tag.encode(), list_proof) {
            return false;
        }
        s_bar += nu * &tag.s;
    }
    if s_bar % &pk.snc.e != proof.t.s {
        return false;
    }
    let w = AugmentedVector {
        data: proof.y.clone(),
        coeffs: ch.pairs.iter().map(|(i, nu)| (*i, nu.clone())).collect(),
    };
    crate::snc_rsa::verify_combined(&w, &proof.t, &pk.snc)
}

/// Recover the blocks at indices J from an untrusted responder that
/// answers challenges over J. Each accepted response contributes one
/// row nu (over J) with right-hand side y; once |J| independent rows
/// accumulate, Gaussian elimination over F_e inverts the system.
pub fn extract_blocks(
    responder: &mut dyn FnMut(&ChallengeI) -> Option<StorageProofI>,
    j_set: &[usize],
    pk: &PublicKeyI,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<BigUint>>> {
    let l = j_set.len();
    if l == 0 {
        return Err(Error::BadCardinality);
    }
    let e = &pk.snc.e;
    let n = pk.snc.n();
    let width = l + n;
    // Reduced rows: [nu over J | y], kept in row-echelon form with
    // pivot column recorded per row.
    let mut rows: Vec<(usize, Vec<BigUint>)> = Vec::new();
    let attempt_cap = 20 * l + 50;
    let mut attempts = 0;
    while rows.len() < l {
        attempts += 1;
        if attempts > attempt_cap {
            return Err(Error::ExtractionStalled);
        }
        let ch = ChallengeI {
            pairs: j_set
                .iter()
                .map(|i| (*i, rng.gen_biguint_below(e)))
                .collect(),
        };
        let Some(proof) = responder(&ch) else { continue };
        if !verify_audit(pk, &ch, &proof) {
            continue;
        }
        let mut row: Vec<BigUint> = ch.pairs.iter().map(|(_, nu)| nu.clone()).collect();
        row.extend(proof.y.iter().cloned());
        // Reduce against the basis, then normalize and adopt if a new
        // pivot appears.
        for (pivot, basis) in &rows {
            if row[*pivot].is_zero() {
                continue;
            }
            let factor = row[*pivot].clone();
            for (r, b) in row.iter_mut().zip(basis) {
                *r = (&*r + e - (&factor * b) % e) % e;
            }
        }
        let Some(pivot) = (0..l).find(|c| !row[*c].is_zero()) else { continue };
        let inv = mod_inverse(&row[pivot], e).expect("e prime, pivot nonzero");
        for r in row.iter_mut() {
            *r = (&*r * &inv) % e;
        }
        rows.push((pivot, row));
    }
    // Back-substitute to a reduced identity on the coefficient columns.
    rows.sort_by_key(|(p, _)| *p);
    for i in (0..l).rev() {
        let (pivot, lower) = {
            let (p, r) = &rows[i];
            (*p, r.clone())
        };
        for (_, upper) in rows.iter_mut().take(i) {
            if upper[pivot].is_zero() {
                continue;
            }
            let factor = upper[pivot].clone();
            for (u, v) in upper.iter_mut().zip(&lower) {
                *u = (&*u + e - (&factor * v) % e) % e;
            }
        }
    }
    Ok(rows
        .into_iter()
        .map(|(_, row)| row[l..width].to_vec())
        .collect())
}
