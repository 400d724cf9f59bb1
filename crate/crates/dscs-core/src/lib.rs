//! Core library for the DSCS provable-data-possession toolkit.
//!
//! Two protocols live here: DSCS I, a fully dynamic scheme built from
//! RSA homomorphic tags plus a rank-based authenticated skip list, and
//! DSCS II, an append-only scheme built from pairing-based homomorphic
//! network-coding signatures.

pub mod crypto;
pub mod dscs1;
pub mod dscs2;
pub mod error;
pub mod profile;
pub mod skiplist;
pub mod snc_pairing;
pub mod snc_rsa;
pub mod wire;

pub use error::{Error, Result};
pub use profile::SecurityProfile;
