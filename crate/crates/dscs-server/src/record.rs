//! Persisted per-file state and the protocol-level request handlers
//! shared by the in-process service and the TCP front end.

use bls12_381::Scalar;
use dscs_core::dscs1::{ServerFileI, UpdateRequestI};
use dscs_core::dscs2::{AppendRequest, ServerFileII};
use dscs_core::skiplist::SkipList;
use dscs_core::snc_pairing::{SncPairPublicKey, SncPairTag};
use dscs_core::snc_rsa::{SncRsaPublicKey, SncRsaTag};
use dscs_core::wire::{put_bytes, put_int, put_u64, put_vec, Cursor};
use num_bigint::BigUint;

use crate::error::{Result, ServerError};

pub const PROTO_DSCS1: u8 = 1;
pub const PROTO_DSCS2: u8 = 2;

/// Everything the server holds for one outsourced file.
#[derive(Debug, Clone)]
pub enum FileRecord {
    One(ServerFileI),
    Two(ServerFileII),
}

impl FileRecord {
    pub fn protocol(&self) -> u8 {
        match self {
            FileRecord::One(_) => PROTO_DSCS1,
            FileRecord::Two(_) => PROTO_DSCS2,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            FileRecord::One(f) => f.m(),
            FileRecord::Two(f) => f.m(),
        }
    }

    /// Canonical on-disk form (seq is the applied-update counter the
    /// write-ahead log keys on).
    pub fn encode(&self, seq: u64) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&1u32.to_be_bytes());
        out.push(self.protocol());
        put_u64(&mut out, seq);
        match self {
            FileRecord::One(f) => {
                out.push(f.list.level_cap());
                put_bytes(&mut out, &f.pk.encode());
                put_vec(&mut out, &f.blocks, |o, b| {
                    put_vec(o, b, |o2, s| put_int(o2, s))
                });
                put_vec(&mut out, &f.tags, |o, t| put_bytes(o, &t.encode()));
                put_bytes(&mut out, &f.list.encode());
            }
            FileRecord::Two(f) => {
                put_bytes(&mut out, &f.pk.encode());
                put_bytes(&mut out, &f.fid);
                put_vec(&mut out, &f.blocks, |o, b| {
                    put_vec(o, b, |o2, s| {
                        put_bytes(o2, &dscs_core::crypto::pairing::scalar_to_bytes(s))
                    })
                });
                put_vec(&mut out, &f.tags, |o, t| put_bytes(o, &t.encode()));
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<(Self, u64)> {
        let mut c = Cursor::new(buf);
        if c.get_u32().map_err(ServerError::Protocol)? != 1 {
            return Err(ServerError::Malformed("unknown record version".into()));
        }
        let proto = c.get_u8().map_err(ServerError::Protocol)?;
        let seq = c.get_u64().map_err(ServerError::Protocol)?;
        let rec = match proto {
            PROTO_DSCS1 => {
                let _level_cap = c.get_u8().map_err(ServerError::Protocol)?;
                let pk = SncRsaPublicKey::decode(c.get_bytes().map_err(ServerError::Protocol)?)?;
                let bn = c.get_count().map_err(ServerError::Protocol)?;
                let mut blocks: Vec<Vec<BigUint>> = Vec::with_capacity(bn);
                for _ in 0..bn {
                    let sn = c.get_count().map_err(ServerError::Protocol)?;
                    let mut b = Vec::with_capacity(sn);
                    for _ in 0..sn {
                        b.push(c.get_int().map_err(ServerError::Protocol)?);
                    }
                    blocks.push(b);
                }
                let tn = c.get_count().map_err(ServerError::Protocol)?;
                let mut tags = Vec::with_capacity(tn);
                for _ in 0..tn {
                    tags.push(SncRsaTag::decode(
                        c.get_bytes().map_err(ServerError::Protocol)?,
                    )?);
                }
                let list = SkipList::decode(c.get_bytes().map_err(ServerError::Protocol)?)?;
                FileRecord::One(ServerFileI {
                    pk,
                    blocks,
                    tags,
                    list,
                })
            }
            PROTO_DSCS2 => {
                let pk = SncPairPublicKey::decode(c.get_bytes().map_err(ServerError::Protocol)?)?;
                let fid = c.get_bytes().map_err(ServerError::Protocol)?.to_vec();
                let bn = c.get_count().map_err(ServerError::Protocol)?;
                let mut blocks: Vec<Vec<Scalar>> = Vec::with_capacity(bn);
                for _ in 0..bn {
                    let sn = c.get_count().map_err(ServerError::Protocol)?;
                    let mut b = Vec::with_capacity(sn);
                    for _ in 0..sn {
                        b.push(dscs_core::crypto::pairing::scalar_from_bytes(
                            c.get_bytes().map_err(ServerError::Protocol)?,
                        )?);
                    }
                    blocks.push(b);
                }
                let tn = c.get_count().map_err(ServerError::Protocol)?;
                let mut tags = Vec::with_capacity(tn);
                for _ in 0..tn {
                    tags.push(SncPairTag::decode(
                        c.get_bytes().map_err(ServerError::Protocol)?,
                    )?);
                }
                FileRecord::Two(ServerFileII {
                    pk,
                    fid,
                    blocks,
                    tags,
                })
            }
            _ => return Err(ServerError::Malformed("unknown protocol id".into())),
        };
        if !c.done() {
            return Err(ServerError::Malformed("trailing bytes in record".into()));
        }
        Ok((rec, seq))
    }

    /// Consistency gate applied at upload time.
    pub fn check_counts(&self) -> Result<()> {
        let ok = match self {
            FileRecord::One(f) => {
                f.blocks.len() == f.tags.len()
                    && f.blocks.len() == f.pk.m()
                    && f.list.root_rank() as usize == f.blocks.len()
            }
            FileRecord::Two(f) => f.blocks.len() == f.tags.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(ServerError::CountMismatch)
        }
    }

    /// Apply one serialized update request deterministically, returning
    /// the serialized response. Used both live and during WAL replay.
    pub fn apply_update_bytes(&mut self, request: &[u8]) -> Result<Vec<u8>> {
        match self {
            FileRecord::One(f) => {
                let req = UpdateRequestI::decode(request)?;
                let resp = f.apply_update(&req)?;
                Ok(resp.encode())
            }
            FileRecord::Two(f) => {
                let req = AppendRequest::decode(request)?;
                if req.block.len() != f.pk.n() {
                    return Err(ServerError::CountMismatch);
                }
                f.apply_append(&req);
                Ok(Vec::new())
            }
        }
    }
}
