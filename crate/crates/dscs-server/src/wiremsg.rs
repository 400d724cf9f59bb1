//! Framed wire messages: magic "DSCS", version, message type, fid and
//! payload, every integer big-endian. Unknown types and malformed
//! frames produce an error reply (code + UTF-8 detail) on the same
//! connection.

use std::io::{self, Read, Write};

use crate::error::{Result, ServerError};

pub const MAGIC: [u8; 4] = *b"DSCS";
pub const VERSION: u8 = 1;

/// Upper bound on any length field; garbage frames must not trigger
/// huge allocations.
const MAX_LEN: u32 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Upload = 0x01,
    Read = 0x02,
    Update = 0x03,
    Challenge = 0x04,
    Error = 0x7F,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(MsgType::Upload),
            0x02 => Some(MsgType::Read),
            0x03 => Some(MsgType::Update),
            0x04 => Some(MsgType::Challenge),
            0x7F => Some(MsgType::Error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub msg_type: u8,
    pub fid: Vec<u8>,
    pub payload: Vec<u8>,
}

impl WireMessage {
    pub fn new(msg_type: MsgType, fid: &[u8], payload: Vec<u8>) -> Self {
        WireMessage {
            msg_type: msg_type as u8,
            fid: fid.to_vec(),
            payload,
        }
    }

    pub fn error(code: u16, detail: &str) -> Self {
        let mut payload = code.to_be_bytes().to_vec();
        payload.extend_from_slice(detail.as_bytes());
        WireMessage {
            msg_type: MsgType::Error as u8,
            fid: Vec::new(),
            payload,
        }
    }

    pub fn from_server_error(e: &ServerError) -> Self {
        Self::error(e.code(), &e.to_string())
    }

    /// Decode an error payload; None when this is not an error frame.
    pub fn as_error(&self) -> Option<(u16, String)> {
        if self.msg_type != MsgType::Error as u8 || self.payload.len() < 2 {
            return None;
        }
        let code = u16::from_be_bytes([self.payload[0], self.payload[1]]);
        Some((
            code,
            String::from_utf8_lossy(&self.payload[2..]).into_owned(),
        ))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.fid.len() + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type);
        out.extend_from_slice(&(self.fid.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.fid);
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = io::Cursor::new(buf);
        let msg = Self::read_from(&mut r)?
            .ok_or_else(|| ServerError::Malformed("empty frame".into()))?;
        if r.position() as usize != buf.len() {
            return Err(ServerError::Malformed("trailing bytes after frame".into()));
        }
        Ok(msg)
    }

    /// Read one frame from a stream. Ok(None) on clean EOF before the
    /// first byte.
    pub fn read_from(r: &mut impl Read) -> Result<Option<Self>> {
        let mut magic = [0u8; 4];
        match r.read_exact(&mut magic) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        if magic != MAGIC {
            return Err(ServerError::Malformed("bad magic".into()));
        }
        let mut hdr = [0u8; 2];
        r.read_exact(&mut hdr)?;
        if hdr[0] != VERSION {
            return Err(ServerError::Malformed("unsupported version".into()));
        }
        let msg_type = hdr[1];
        let fid = read_len_prefixed(r)?;
        let payload = read_len_prefixed(r)?;
        Ok(Some(WireMessage {
            msg_type,
            fid,
            payload,
        }))
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }
}

fn read_len_prefixed(r: &mut impl Read) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len);
    if len > MAX_LEN {
        return Err(ServerError::Malformed("length field too large".into()));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
