//! Pluggable server misbehavior for adversarial tests and the bench
//! harness. Wraps the in-memory protocol-I server; the DSCS II side
//! only needs block corruption, which callers apply directly.

use dscs_core::dscs1::{ChallengeI, ServerFileI, StorageProofI, UpdateRequestI};
use dscs_core::skiplist::ReadResponse;
use dscs_core::Result;
use num_bigint::BigUint;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServerBehavior {
    Honest,
    /// Acknowledge updates without applying them; answer the
    /// post-update read from the untouched structure.
    DropUpdate,
    /// Apply updates at a neighboring index.
    MisplaceUpdate,
    /// Apply updates, but keep answering reads and audits from the
    /// pre-update snapshot.
    ServeStale,
    /// Corrupt this fraction of blocks (once, lazily) before proving.
    CorruptFraction(f64),
}

#[derive(Debug, Clone)]
pub struct TestServerI {
    pub file: ServerFileI,
    pub behavior: ServerBehavior,
    stale: Option<ServerFileI>,
    corrupted: bool,
}

impl TestServerI {
    pub fn new(file: ServerFileI, behavior: ServerBehavior) -> Self {
        TestServerI {
            file,
            behavior,
            stale: None,
            corrupted: false,
        }
    }

    fn serving_copy(&self) -> &ServerFileI {
        match (&self.behavior, &self.stale) {
            (ServerBehavior::ServeStale, Some(old)) => old,
            _ => &self.file,
        }
    }

    pub fn ensure_corrupted(&mut self, rng: &mut impl Rng) {
        let ServerBehavior::CorruptFraction(beta) = self.behavior else { return };
        if self.corrupted {
            return;
        }
        self.corrupted = true;
        let m = self.file.m();
        let count = ((m as f64) * beta).round() as usize;
        let picks = rand::seq::index::sample(rng, m, count.min(m));
        for i in picks.iter() {
            // Flip one segment; the tag no longer matches.
            self.file.blocks[i][0] = (&self.file.blocks[i][0] + 1u32) % &self.file.pk.e;
        }
    }

    pub fn path_read(&self, pos: usize) -> Result<ReadResponse> {
        self.serving_copy().path_read(pos)
    }

    pub fn auth_read(&self, i: usize) -> Result<(Vec<BigUint>, dscs_core::snc_rsa::SncRsaTag, ReadResponse)> {
        self.serving_copy().auth_read(i)
    }

    pub fn prove(&self, ch: &ChallengeI) -> Result<StorageProofI> {
        self.serving_copy().prove(ch)
    }

    pub fn apply_update(&mut self, req: &UpdateRequestI) -> Result<ReadResponse> {
        match self.behavior {
            ServerBehavior::DropUpdate => {
                // Answer with a plausible read from the untouched list.
                let m = self.file.m();
                let pos = match req.updtype {
                    dscs_core::skiplist::UpdateType::Insert => (req.i + 1).min(m),
                    dscs_core::skiplist::UpdateType::Modify => req.i,
                    dscs_core::skiplist::UpdateType::Delete => req.i.saturating_sub(1),
                };
                self.file.path_read(pos)
            }
            ServerBehavior::MisplaceUpdate => {
                let mut shifted = req.clone();
                shifted.i = if req.i + 1 <= self.file.m() { req.i + 1 } else { req.i.saturating_sub(1) };
                self.file.apply_update(&shifted)
            }
            ServerBehavior::ServeStale => {
                self.stale = Some(self.file.clone());
                self.file.apply_update(req)
            }
            _ => self.file.apply_update(req),
        }
    }
}
