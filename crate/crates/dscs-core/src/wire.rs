//! Canonical byte encodings shared by every serialized structure.
//!
//! INT = 4-byte big-endian length followed by the big-endian magnitude.
//! VEC = 4-byte big-endian element count followed by the elements.
//! Group elements travel as their compressed canonical encoding wrapped
//! in an INT.

use num_bigint::BigUint;

use crate::error::{Error, Result};

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

pub fn put_int(out: &mut Vec<u8>, v: &BigUint) {
    put_bytes(out, &v.to_bytes_be());
}

pub fn put_vec<T>(out: &mut Vec<u8>, items: &[T], mut enc: impl FnMut(&mut Vec<u8>, &T)) {
    put_u32(out, items.len() as u32);
    for it in items {
        enc(out, it);
    }
}

pub fn encode_int(v: &BigUint) -> Vec<u8> {
    let mut out = Vec::new();
    put_int(&mut out, v);
    out
}

/// Sequential reader over a canonical byte buffer.
pub struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn done(&self) -> bool {
        self.remaining() == 0
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Malformed("buffer underrun"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_be_bytes(a))
    }

    pub fn get_bytes(&mut self) -> Result<&'a [u8]> {
        let len = self.get_u32()? as usize;
        self.take(len)
    }

    pub fn get_int(&mut self) -> Result<BigUint> {
        Ok(BigUint::from_bytes_be(self.get_bytes()?))
    }

    pub fn get_count(&mut self) -> Result<usize> {
        Ok(self.get_u32()? as usize)
    }
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_round_trip() {
        for v in [0u64, 1, 255, 256, u64::MAX] {
            let big = BigUint::from(v);
            let enc = encode_int(&big);
            let mut c = Cursor::new(&enc);
            assert_eq!(c.get_int().unwrap(), big);
            assert!(c.done());
        }
    }

    #[test]
    fn underrun_is_an_error() {
        let mut c = Cursor::new(&[0, 0, 0, 9, 1]);
        assert!(c.get_bytes().is_err());
    }
}
