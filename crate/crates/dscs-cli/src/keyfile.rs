//! Key-file persistence: everything the client must keep between
//! invocations, as one canonical binary blob. Encryption at rest is a
//! deployment concern; the format is plain.

use std::path::Path;

use dscs_core::crypto::pairing::{scalar_from_bytes, scalar_to_bytes};
use dscs_core::crypto::rsa::RsaTrapdoor;
use dscs_core::dscs1::{ClientStateI, PublicKeyI};
use dscs_core::dscs2::ClientStateII;
use dscs_core::snc_pairing::{SncPairPublicKey, SncPairSecret};
use dscs_core::wire::{put_bytes, put_int, put_u32, put_u64, Cursor};
use dscs_core::SecurityProfile;

use crate::{CliError, Protocol, Result};

const MAGIC: &[u8; 4] = b"DSCK";
const VERSION: u8 = 1;

/// One client identity, either protocol.
pub enum KeyFile {
    One(ClientStateI),
    Two(ClientStateII),
}

impl KeyFile {
    pub fn protocol(&self) -> Protocol {
        match self {
            KeyFile::One(_) => Protocol::Dscs1,
            KeyFile::Two(_) => Protocol::Dscs2,
        }
    }
}

fn put_profile(out: &mut Vec<u8>, p: &SecurityProfile) {
    put_u32(out, p.lambda as u32);
    put_u32(out, p.prime_bits as u32);
    put_u32(out, p.e_bits as u32);
    put_u32(out, p.segment_bits as u32);
    out.push(p.level_cap);
}

fn get_profile(c: &mut Cursor) -> Result<SecurityProfile> {
    Ok(SecurityProfile {
        lambda: c.get_u32().map_err(CliError::from)? as usize,
        prime_bits: c.get_u32().map_err(CliError::from)? as usize,
        e_bits: c.get_u32().map_err(CliError::from)? as usize,
        segment_bits: c.get_u32().map_err(CliError::from)? as usize,
        level_cap: c.get_u8().map_err(CliError::from)?,
    })
}

pub fn encode(key: &KeyFile) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    match key {
        KeyFile::One(s) => {
            out.push(1);
            put_profile(&mut out, &s.profile);
            put_int(&mut out, &s.trapdoor.p);
            put_int(&mut out, &s.trapdoor.q);
            put_bytes(&mut out, &s.pk.encode());
        }
        KeyFile::Two(s) => {
            out.push(2);
            put_profile(&mut out, &s.profile);
            put_bytes(&mut out, &scalar_to_bytes(&s.sk.alpha));
            put_bytes(&mut out, &s.pk.encode());
            put_bytes(&mut out, &s.fid);
            put_u64(&mut out, s.m as u64);
        }
    }
    out
}

pub fn decode(buf: &[u8]) -> Result<KeyFile> {
    let bad = |m: &str| CliError::Usage(format!("key file: {m}"));
    let mut c = Cursor::new(buf);
    if c.take(4).map_err(CliError::from)? != MAGIC {
        return Err(bad("bad magic"));
    }
    if c.get_u8().map_err(CliError::from)? != VERSION {
        return Err(bad("unsupported version"));
    }
    match c.get_u8().map_err(CliError::from)? {
        1 => {
            let profile = get_profile(&mut c)?;
            let p = c.get_int().map_err(CliError::from)?;
            let q = c.get_int().map_err(CliError::from)?;
            let pk = PublicKeyI::decode(c.get_bytes().map_err(CliError::from)?)?;
            Ok(KeyFile::One(ClientStateI::from_parts(
                profile,
                RsaTrapdoor::new(p, q),
                pk,
            )))
        }
        2 => {
            let profile = get_profile(&mut c)?;
            let alpha = scalar_from_bytes(c.get_bytes().map_err(CliError::from)?)?;
            let pk = SncPairPublicKey::decode(c.get_bytes().map_err(CliError::from)?)?;
            let fid = c.get_bytes().map_err(CliError::from)?.to_vec();
            let m = c.get_u64().map_err(CliError::from)? as usize;
            Ok(KeyFile::Two(ClientStateII {
                profile,
                sk: SncPairSecret { alpha },
                pk,
                fid,
                m,
            }))
        }
        _ => Err(bad("unknown protocol tag")),
    }
}

pub fn save(path: &Path, key: &KeyFile) -> Result<()> {
    std::fs::write(path, encode(key))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<KeyFile> {
    let buf = std::fs::read(path)
        .map_err(|e| CliError::Usage(format!("key file {}: {e}", path.display())))?;
    decode(&buf)
}
