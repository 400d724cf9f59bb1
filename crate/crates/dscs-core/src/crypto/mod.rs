//! Number-theoretic and group primitives shared by both protocols.

pub mod pairing;
pub mod primes;
pub mod rsa;

use sha2::{Digest, Sha256};

pub const DIGEST_LEN: usize = 32;

/// Collision-resistant hash used everywhere a digest is needed (SHA-256).
pub fn digest(data: &[u8]) -> [u8; DIGEST_LEN] {
    let mut h = Sha256::new();
    h.update(data);
    h.finalize().into()
}

/// Hash over a list of length-delimited parts, so no two distinct part
/// lists collide by concatenation.
pub fn digest_parts(parts: &[&[u8]]) -> [u8; DIGEST_LEN] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p);
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_matches_reference_vector() {
        // SHA-256 of the empty string.
        let expected =
            hex_to_bytes("e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(digest(b"").to_vec(), expected);
    }

    #[test]
    fn deterministic_and_separating() {
        assert_eq!(digest(b"abc"), digest(b"abc"));
        assert_ne!(digest(b"abc"), digest(b"abd"));
        // Length framing keeps part boundaries distinct.
        assert_ne!(digest_parts(&[b"ab", b"c"]), digest_parts(&[b"a", b"bc"]));
    }

    fn hex_to_bytes(s: &str) -> Vec<u8> {
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
            .collect()
    }
}
