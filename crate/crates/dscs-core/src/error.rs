use thiserror::Error;

/// Errors surfaced by the protocol and primitive layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("prime generation exceeded the attempt cap")]
    GenerationTimeout,
    #[error("base and exponent lists have different lengths")]
    LengthMismatch,
    #[error("value is not invertible modulo phi(N); resample the public exponent")]
    NotInvertible,
    #[error("segment value is not an element of the tag field")]
    SegmentOutOfField,
    #[error("denominator shares a factor with the modulus; modulus compromised")]
    NonInvertibleDenominator,
    #[error("index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("challenge cardinality must be in [1, m]")]
    BadCardinality,
    #[error("server read proof failed verification; refusing to start the update")]
    StaleProof,
    #[error("extraction stalled: too many dependent or invalid responses")]
    ExtractionStalled,
    #[error("DSCS II supports appends only")]
    AppendOnly,
    #[error("malformed encoding: {0}")]
    Malformed(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
