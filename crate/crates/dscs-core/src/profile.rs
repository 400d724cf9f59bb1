/// Parameter profile for the RSA-based protocol.
///
/// The `test` profile keeps the arithmetic small enough for exhaustive
/// property tests; the `full` profile matches the deployment parameters
/// (112-bit security, 2048-bit modulus, 113-bit tag field).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecurityProfile {
    /// Security parameter in bits; also the fid length for DSCS II.
    pub lambda: usize,
    /// Bit length of each safe prime factor of N.
    pub prime_bits: usize,
    /// Bit length of the public prime e (the tag field modulus).
    pub e_bits: usize,
    /// Bit width of a file segment; must be < e_bits so segments lie in F_e.
    pub segment_bits: usize,
    /// Cap on hash-derived skip-list tower heights.
    pub level_cap: u8,
}

impl SecurityProfile {
    pub const fn test() -> Self {
        SecurityProfile {
            lambda: 16,
            prime_bits: 64,
            e_bits: 17,
            segment_bits: 16,
            level_cap: 32,
        }
    }

    pub const fn full() -> Self {
        SecurityProfile {
            lambda: 112,
            prime_bits: 1024,
            e_bits: 113,
            segment_bits: 112,
            level_cap: 32,
        }
    }

    /// Bytes per segment on disk and on the wire.
    pub fn segment_bytes(&self) -> usize {
        self.segment_bits / 8
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "test" => Some(Self::test()),
            "full" => Some(Self::full()),
            _ => None,
        }
    }
}

impl Default for SecurityProfile {
    fn default() -> Self {
        Self::test()
    }
}
