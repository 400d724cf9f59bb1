//! Durable per-file storage: one directory per fid holding the
//! canonical state blob, a human-readable manifest, and a write-ahead
//! record during updates.
//!
//! Update protocol (seq = applied-update counter stored in the state):
//!   1. write wal = {seq+1, request bytes}, fsync;
//!   2. write state.tmp with the post-update record, fsync, rename over
//!      state.bin (atomic), fsync the directory;
//!   3. remove wal.
//! Recovery on open: a parseable wal with seq = state.seq + 1 is
//! replayed (the request is deterministic); a torn wal or one whose seq
//! is already applied is discarded. Either way the file is fully
//! pre-update or fully post-update — never in between.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServerError};
use crate::record::FileRecord;

/// Fault-injection points for the durability tests; `None` in
/// production.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    None,
    BeforeWal,
    /// Crash halfway through writing the wal record (torn write).
    MidWal,
    AfterWal,
    AfterTmpWrite,
    AfterRename,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    fid_hex: String,
    protocol: u8,
    m: usize,
    seq: u64,
}

#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

fn fid_hex(fid: &[u8]) -> String {
    fid.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write-then-rename with fsync on file and directory; the rename is
/// the commit point.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    sync_dir(path.parent().expect("file paths have parents"))?;
    Ok(())
}

fn sync_dir(dir: &Path) -> Result<()> {
    File::open(dir)?.sync_all()?;
    Ok(())
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(FileStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, fid: &[u8]) -> PathBuf {
        self.root.join(fid_hex(fid))
    }

    pub fn exists(&self, fid: &[u8]) -> bool {
        self.dir(fid).join("state.bin").exists()
    }

    pub fn create(&self, fid: &[u8], record: &FileRecord) -> Result<()> {
        let dir = self.dir(fid);
        if self.exists(fid) {
            return Err(ServerError::DuplicateFid);
        }
        record.check_counts()?;
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join("state.bin"), &record.encode(0))?;
        self.write_manifest(fid, record, 0)?;
        Ok(())
    }

    fn write_manifest(&self, fid: &[u8], record: &FileRecord, seq: u64) -> Result<()> {
        let manifest = Manifest {
            fid_hex: fid_hex(fid),
            protocol: record.protocol(),
            m: record.m(),
            seq,
        };
        let json = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| ServerError::Malformed(e.to_string()))?;
        write_atomic(&self.dir(fid).join("manifest.json"), &json)
    }

    /// Load a record, running write-ahead recovery first.
    pub fn load(&self, fid: &[u8]) -> Result<(FileRecord, u64)> {
        let dir = self.dir(fid);
        let state_path = dir.join("state.bin");
        if !state_path.exists() {
            return Err(ServerError::UnknownFid);
        }
        let (mut record, mut seq) = FileRecord::decode(&fs::read(&state_path)?)?;
        let wal_path = dir.join("wal.bin");
        if wal_path.exists() {
            match parse_wal(&fs::read(&wal_path)?) {
                Some((wal_seq, request)) if wal_seq == seq + 1 => {
                    // Committed intent that never reached the state
                    // blob: replay it.
                    record.apply_update_bytes(&request)?;
                    seq = wal_seq;
                    write_atomic(&state_path, &record.encode(seq))?;
                    self.write_manifest(fid, &record, seq)?;
                }
                // Torn record or already-applied seq: the intent never
                // finished landing (or fully landed); drop it.
                _ => {}
            }
            fs::remove_file(&wal_path)?;
            sync_dir(&dir)?;
        }
        Ok((record, seq))
    }

    /// Apply an update durably. The response bytes are recomputed
    /// deterministically from the request, so a replay after a crash
    /// converges on the same state.
    pub fn apply_update(&self, fid: &[u8], request: &[u8], crash: CrashPoint) -> Result<Vec<u8>> {
        let dir = self.dir(fid);
        let (mut record, seq) = self.load(fid)?;
        if crash == CrashPoint::BeforeWal {
            return Err(ServerError::SimulatedCrash);
        }
        let wal = encode_wal(seq + 1, request);
        let wal_path = dir.join("wal.bin");
        if crash == CrashPoint::MidWal {
            let mut f = File::create(&wal_path)?;
            f.write_all(&wal[..wal.len() / 2])?;
            f.sync_all()?;
            return Err(ServerError::SimulatedCrash);
        }
        {
            let mut f = OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(&wal_path)?;
            f.write_all(&wal)?;
            f.sync_all()?;
        }
        if crash == CrashPoint::AfterWal {
            return Err(ServerError::SimulatedCrash);
        }

        // Validate and apply before the state write; a rejected request
        // (bad index, malformed body) must leave no wal behind.
        let response = match record.apply_update_bytes(request) {
            Ok(r) => r,
            Err(e) => {
                fs::remove_file(&wal_path)?;
                return Err(e);
            }
        };

        let state_path = dir.join("state.bin");
        let new_state = record.encode(seq + 1);
        if crash == CrashPoint::AfterTmpWrite {
            let tmp = state_path.with_extension("tmp");
            let mut f = File::create(&tmp)?;
            f.write_all(&new_state)?;
            f.sync_all()?;
            return Err(ServerError::SimulatedCrash);
        }
        write_atomic(&state_path, &new_state)?;
        if crash == CrashPoint::AfterRename {
            return Err(ServerError::SimulatedCrash);
        }
        fs::remove_file(&wal_path)?;
        sync_dir(&dir)?;
        self.write_manifest(fid, &record, seq + 1)?;
        Ok(response)
    }

    pub fn list_fids(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join("state.bin").exists() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }
}

fn encode_wal(seq: u64, request: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + request.len());
    out.extend_from_slice(&seq.to_be_bytes());
    out.extend_from_slice(&(request.len() as u64).to_be_bytes());
    out.extend_from_slice(request);
    out
}

fn parse_wal(buf: &[u8]) -> Option<(u64, Vec<u8>)> {
    if buf.len() < 16 {
        return None;
    }
    let seq = u64::from_be_bytes(buf[0..8].try_into().unwrap());
    let len = u64::from_be_bytes(buf[8..16].try_into().unwrap()) as usize;
    if buf.len() != 16 + len {
        return None;
    }
    Some((seq, buf[16..].to_vec()))
}
