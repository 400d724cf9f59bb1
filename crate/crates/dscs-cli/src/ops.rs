//! Remote protocol operations over one server connection. Each helper
//! performs the full client side of a protocol step, including
//! verification, and reports byte counts for the bench harness.

use bls12_381::Scalar;
use dscs_core::crypto::pairing::{scalar_from_be_bytes, scalar_from_bytes};
use dscs_core::dscs1::{
    challenge, init_update, verify_audit, verify_read, verify_update, ClientStateI,
    OutsourceBundle, StorageProofI,
};
use dscs_core::dscs2::{
    append, challenge2, verify_audit2, verify_read2_secret, ClientStateII, OutsourceBundle2,
    StorageProofII,
};
use dscs_core::skiplist::{ReadResponse, UpdateType};
use dscs_core::snc_pairing::SncPairTag;
use dscs_core::snc_rsa::SncRsaTag;
use dscs_core::wire::Cursor;
use dscs_server::service::{encode_read_request, encode_upload1, encode_upload2, READ_BLOCK, READ_PATH};
use dscs_server::wiremsg::{MsgType, WireMessage};
use dscs_server::WireClient;
use num_bigint::BigUint;
use rand::Rng;

use crate::{CliError, Result};

fn send(conn: &mut WireClient, msg: &WireMessage) -> Result<Vec<u8>> {
    conn.request_ok(msg).map_err(CliError::from)
}

// ---- DSCS I ----

pub fn upload1(
    conn: &mut WireClient,
    fid: &[u8],
    state: &ClientStateI,
    bundle: &OutsourceBundle,
) -> Result<()> {
    let payload = encode_upload1(state.pk.level_cap, &state.pk.snc, bundle);
    send(conn, &WireMessage::new(MsgType::Upload, fid, payload))?;
    Ok(())
}

/// Authenticated read of block i; errs with Verify if the proof is bad.
pub fn read1(
    conn: &mut WireClient,
    fid: &[u8],
    state: &ClientStateI,
    i: usize,
) -> Result<Vec<BigUint>> {
    let payload = send(
        conn,
        &WireMessage::new(MsgType::Read, fid, encode_read_request(READ_BLOCK, i)),
    )?;
    let mut c = Cursor::new(&payload);
    let k = c.get_count().map_err(CliError::from)?;
    let mut block = Vec::with_capacity(k);
    for _ in 0..k {
        block.push(c.get_int().map_err(CliError::from)?);
    }
    let tag = SncRsaTag::decode(c.get_bytes().map_err(CliError::from)?)?;
    let resp = ReadResponse::decode(c.take(c.remaining()).map_err(CliError::from)?)?;
    if !verify_read(&state.pk, i, &block, &tag, &resp) {
        return Err(CliError::Verify(format!("read proof for block {i}")));
    }
    Ok(block)
}

fn path_read1(conn: &mut WireClient, fid: &[u8], pos: usize) -> Result<ReadResponse> {
    let payload = send(
        conn,
        &WireMessage::new(MsgType::Read, fid, encode_read_request(READ_PATH, pos)),
    )?;
    Ok(ReadResponse::decode(&payload)?)
}

/// Full three-message update transaction: anchor read(s), update
/// request, response verification with commit/rollback.
pub fn update1(
    conn: &mut WireClient,
    fid: &[u8],
    state: &mut ClientStateI,
    i: usize,
    updtype: UpdateType,
    new_block: Option<&[BigUint]>,
    rng: &mut impl Rng,
) -> Result<()> {
    let anchor_pos = if updtype == UpdateType::Delete { i - 1 } else { i };
    let anchor = path_read1(conn, fid, anchor_pos)?;
    let victim = if updtype == UpdateType::Delete {
        Some(path_read1(conn, fid, i)?)
    } else {
        None
    };
    let req = init_update(state, i, updtype, new_block, &anchor, victim.as_ref(), rng)?;
    let payload = send(conn, &WireMessage::new(MsgType::Update, fid, req.encode()))?;
    let resp = ReadResponse::decode(&payload)?;
    if !verify_update(state, &resp) {
        return Err(CliError::Verify(format!("{updtype:?} at {i} rejected; state rolled back")));
    }
    Ok(())
}

/// One audit round; returns the proof size in bytes on success.
pub fn audit1(
    conn: &mut WireClient,
    fid: &[u8],
    state: &ClientStateI,
    l: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    let ch = challenge(&state.pk, l, rng)?;
    let payload = send(conn, &WireMessage::new(MsgType::Challenge, fid, ch.encode()))?;
    let proof = StorageProofI::decode(&payload)?;
    if !verify_audit(&state.pk, &ch, &proof) {
        return Err(CliError::Verify("audit proof".into()));
    }
    Ok(payload.len())
}

// ---- DSCS II ----

pub fn upload2(
    conn: &mut WireClient,
    state: &ClientStateII,
    bundle: &OutsourceBundle2,
) -> Result<()> {
    let payload = encode_upload2(&state.pk, bundle);
    send(conn, &WireMessage::new(MsgType::Upload, &state.fid, payload))?;
    Ok(())
}

pub fn read2(conn: &mut WireClient, state: &ClientStateII, i: usize) -> Result<Vec<Scalar>> {
    let payload = send(
        conn,
        &WireMessage::new(MsgType::Read, &state.fid, encode_read_request(READ_BLOCK, i)),
    )?;
    let mut c = Cursor::new(&payload);
    let k = c.get_count().map_err(CliError::from)?;
    let mut block = Vec::with_capacity(k);
    for _ in 0..k {
        block.push(scalar_from_bytes(c.get_bytes().map_err(CliError::from)?)?);
    }
    let tag = SncPairTag::decode(c.get_bytes().map_err(CliError::from)?)?;
    if !verify_read2_secret(state, i, &block, &tag) {
        return Err(CliError::Verify(format!("read tag for block {i}")));
    }
    Ok(block)
}

pub fn append2(conn: &mut WireClient, state: &mut ClientStateII, block: &[Scalar]) -> Result<()> {
    let req = append(state, block)?;
    let fid = state.fid.clone();
    match send(conn, &WireMessage::new(MsgType::Update, &fid, req.encode())) {
        Ok(_) => Ok(()),
        Err(e) => {
            // The server did not take the block; roll the local count back.
            state.m -= 1;
            Err(e)
        }
    }
}

pub fn audit2(
    conn: &mut WireClient,
    state: &ClientStateII,
    l: usize,
    rng: &mut impl Rng,
) -> Result<usize> {
    let ch = challenge2(state.m, l, rng)?;
    let payload = send(
        conn,
        &WireMessage::new(MsgType::Challenge, &state.fid, ch.encode()),
    )?;
    let proof = StorageProofII::decode(&payload)?;
    if !verify_audit2(&state.pk, &state.fid, &ch, &proof) {
        return Err(CliError::Verify("audit proof".into()));
    }
    Ok(payload.len())
}

// ---- block material from raw bytes ----

/// Pack raw bytes into one DSCS I block of n segments, zero-padded.
/// Errs if the data exceeds the block capacity.
pub fn bytes_to_block1(data: &[u8], n: usize, seg_bytes: usize) -> Result<Vec<BigUint>> {
    let cap = n * seg_bytes;
    if data.len() > cap {
        return Err(CliError::Usage(format!(
            "block data is {} bytes; capacity is {cap}",
            data.len()
        )));
    }
    let mut padded = data.to_vec();
    padded.resize(cap, 0);
    Ok(padded
        .chunks(seg_bytes)
        .map(BigUint::from_bytes_be)
        .collect())
}

/// Same packing for a DSCS II block of n scalar segments.
pub fn bytes_to_block2(data: &[u8], n: usize, seg_bytes: usize) -> Result<Vec<Scalar>> {
    let cap = n * seg_bytes;
    if data.len() > cap {
        return Err(CliError::Usage(format!(
            "block data is {} bytes; capacity is {cap}",
            data.len()
        )));
    }
    let mut padded = data.to_vec();
    padded.resize(cap, 0);
    Ok(padded.chunks(seg_bytes).map(scalar_from_be_bytes).collect())
}
