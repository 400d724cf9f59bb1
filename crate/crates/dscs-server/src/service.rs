//! Request dispatch and the per-file lock discipline: reads and audits
//! share the file, updates are exclusive, and a conflicting request is
//! answered Busy rather than queued (the client retries).

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use bls12_381::Scalar;
use dscs_core::dscs1::{ChallengeI, OutsourceBundle};
use dscs_core::dscs2::{ChallengeII, OutsourceBundle2, ServerFileII};
use dscs_core::skiplist::SkipList;
use dscs_core::snc_pairing::{SncPairPublicKey, SncPairTag};
use dscs_core::snc_rsa::{SncRsaPublicKey, SncRsaTag};
use dscs_core::wire::{put_bytes, put_int, put_u64, put_vec, Cursor};
use dscs_core::dscs1::ServerFileI;
use num_bigint::BigUint;

use crate::error::{Result, ServerError};
use crate::record::{FileRecord, PROTO_DSCS1, PROTO_DSCS2};
use crate::store::FileStore;
use crate::wiremsg::{MsgType, WireMessage};

/// Read-request kinds inside the 0x02 payload.
pub const READ_BLOCK: u8 = 0;
/// Skip-list path read (update anchoring); position may be 0.
pub const READ_PATH: u8 = 1;

/// Per-file synchronization plus occupancy counters; the counters back
/// a trace assertion that a write never overlaps an audit.
#[derive(Debug, Default)]
struct FileSync {
    lock: RwLock<()>,
    audits: AtomicUsize,
    writes: AtomicUsize,
}

#[derive(Debug)]
pub struct Service {
    store: FileStore,
    sync: Mutex<HashMap<Vec<u8>, Arc<FileSync>>>,
}

impl Service {
    pub fn new(store: FileStore) -> Self {
        Service {
            store,
            sync: Mutex::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &FileStore {
        &self.store
    }

    fn sync_for(&self, fid: &[u8]) -> Arc<FileSync> {
        self.sync
            .lock()
            .expect("sync map poisoned")
            .entry(fid.to_vec())
            .or_default()
            .clone()
    }

    /// Run `f` while holding the file's shared (audit) lease — what a
    /// long-running auditor effectively does across several frames.
    pub fn with_audit_lease<R>(&self, fid: &[u8], f: impl FnOnce() -> R) -> R {
        let s = self.sync_for(fid);
        let _r = s.lock.read().expect("file lock poisoned");
        f()
    }

    /// Run `f` while holding the file's exclusive (writer) lease.
    pub fn with_update_lease<R>(&self, fid: &[u8], f: impl FnOnce() -> R) -> R {
        let s = self.sync_for(fid);
        let _w = s.lock.write().expect("file lock poisoned");
        f()
    }

    /// Handle one request frame; never panics, never drops the
    /// connection — protocol failures become error frames.
    pub fn handle(&self, msg: &WireMessage) -> WireMessage {
        let out = match MsgType::from_byte(msg.msg_type) {
            Some(MsgType::Upload) => self.handle_upload(msg),
            Some(MsgType::Read) => self.handle_read(msg),
            Some(MsgType::Update) => self.handle_update(msg),
            Some(MsgType::Challenge) => self.handle_challenge(msg),
            Some(MsgType::Error) | None => {
                Err(ServerError::Malformed("unknown message type".into()))
            }
        };
        match out {
            Ok(payload) => WireMessage {
                msg_type: msg.msg_type,
                fid: msg.fid.clone(),
                payload,
            },
            Err(e) => WireMessage::from_server_error(&e),
        }
    }

    fn handle_upload(&self, msg: &WireMessage) -> Result<Vec<u8>> {
        let mut record = decode_upload(&msg.payload)?;
        if let FileRecord::Two(f) = &mut record {
            f.fid = msg.fid.clone();
        }
        let s = self.sync_for(&msg.fid);
        let _w = s.lock.write().expect("file lock poisoned");
        self.store.create(&msg.fid, &record)?;
        Ok(Vec::new())
    }

    fn handle_read(&self, msg: &WireMessage) -> Result<Vec<u8>> {
        let mut c = Cursor::new(&msg.payload);
        let kind = c.get_u8().map_err(ServerError::Protocol)?;
        let idx = c.get_u64().map_err(ServerError::Protocol)? as usize;
        let s = self.sync_for(&msg.fid);
        let _r = s.lock.read().expect("file lock poisoned");
        let (record, _) = self.store.load(&msg.fid)?;
        match (&record, kind) {
            (FileRecord::One(f), READ_BLOCK) => {
                let (block, tag, resp) = f.auth_read(idx)?;
                let mut out = Vec::new();
                put_vec(&mut out, &block, |o, v| put_int(o, v));
                put_bytes(&mut out, &tag.encode());
                out.extend_from_slice(&resp.encode());
                Ok(out)
            }
            (FileRecord::One(f), READ_PATH) => Ok(f.path_read(idx)?.encode()),
            (FileRecord::Two(f), READ_BLOCK) => {
                let (block, tag) = f.auth_read2(idx)?;
                let mut out = Vec::new();
                put_vec(&mut out, &block, |o, v| {
                    put_bytes(o, &dscs_core::crypto::pairing::scalar_to_bytes(v))
                });
                put_bytes(&mut out, &tag.encode());
                Ok(out)
            }
            (FileRecord::Two(_), _) => {
                Err(ServerError::Malformed("path reads are a DSCS I notion".into()))
            }
            _ => Err(ServerError::Malformed("unknown read kind".into())),
        }
    }

    fn handle_update(&self, msg: &WireMessage) -> Result<Vec<u8>> {
        let s = self.sync_for(&msg.fid);
        let Ok(_w) = s.lock.try_write() else {
            return Err(ServerError::Busy);
        };
        s.writes.fetch_add(1, Ordering::SeqCst);
        assert_eq!(s.audits.load(Ordering::SeqCst), 0, "write overlapping audit");
        let out = self
            .store
            .apply_update(&msg.fid, &msg.payload, crate::store::CrashPoint::None);
        s.writes.fetch_sub(1, Ordering::SeqCst);
        out
    }

    fn handle_challenge(&self, msg: &WireMessage) -> Result<Vec<u8>> {
        let s = self.sync_for(&msg.fid);
        let Ok(_r) = s.lock.try_read() else {
            return Err(ServerError::Busy);
        };
        s.audits.fetch_add(1, Ordering::SeqCst);
        assert_eq!(s.writes.load(Ordering::SeqCst), 0, "audit overlapping write");
        let out = (|| {
            let (record, _) = self.store.load(&msg.fid)?;
            match record {
                FileRecord::One(f) => {
                    let ch = ChallengeI::decode(&msg.payload)?;
                    Ok(f.prove(&ch)?.encode())
                }
                FileRecord::Two(f) => {
                    let ch = ChallengeII::decode(&msg.payload)?;
                    Ok(f.prove2(&ch)?.encode())
                }
            }
        })();
        s.audits.fetch_sub(1, Ordering::SeqCst);
        out
    }
}

// ---- upload payload grammar (shared with the client side) ----

pub fn encode_upload1(level_cap: u8, pk: &SncRsaPublicKey, bundle: &OutsourceBundle) -> Vec<u8> {
    let mut out = vec![PROTO_DSCS1, level_cap];
    put_bytes(&mut out, &pk.encode());
    put_vec(&mut out, &bundle.blocks, |o, b| {
        put_vec(o, b, |o2, v| put_int(o2, v))
    });
    put_vec(&mut out, &bundle.tags, |o, t| put_bytes(o, &t.encode()));
    out
}

pub fn encode_upload2(pk: &SncPairPublicKey, bundle: &OutsourceBundle2) -> Vec<u8> {
    let mut out = vec![PROTO_DSCS2];
    put_bytes(&mut out, &pk.encode());
    put_vec(&mut out, &bundle.blocks, |o, b| {
        put_vec(o, b, |o2, v| {
            put_bytes(o2, &dscs_core::crypto::pairing::scalar_to_bytes(v))
        })
    });
    put_vec(&mut out, &bundle.tags, |o, t| put_bytes(o, &t.encode()));
    out
}

fn decode_upload(payload: &[u8]) -> Result<FileRecord> {
    let mut c = Cursor::new(payload);
    match c.get_u8().map_err(ServerError::Protocol)? {
        PROTO_DSCS1 => {
            let level_cap = c.get_u8().map_err(ServerError::Protocol)?;
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
            if blocks.len() != tags.len() || blocks.len() != pk.m() {
                return Err(ServerError::CountMismatch);
            }
            let list = SkipList::init(tags.iter().map(|t| t.encode()).collect(), level_cap);
            Ok(FileRecord::One(ServerFileI {
                pk,
                blocks,
                tags,
                list,
            }))
        }
        PROTO_DSCS2 => {
            let pk = SncPairPublicKey::decode(c.get_bytes().map_err(ServerError::Protocol)?)?;
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
            if blocks.len() != tags.len() {
                return Err(ServerError::CountMismatch);
            }
            Ok(FileRecord::Two(ServerFileII {
                pk,
                fid: Vec::new(), // filled from the frame fid at create
                blocks,
                tags,
            }))
        }
        _ => Err(ServerError::Malformed("unknown protocol id".into())),
    }
}

pub fn encode_read_request(kind: u8, idx: usize) -> Vec<u8> {
    let mut out = vec![kind];
    put_u64(&mut out, idx as u64);
    out
}
