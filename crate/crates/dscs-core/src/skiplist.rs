//! Rank-based authenticated skip list.
//!
//! The list stores an ordered sequence of byte-string elements in its
//! bottom level. Every node carries a rank (number of element-bearing
//! bottom nodes in its subtree) and a label:
//!
//! ```text
//! f(z) = h(l(z) || rank(z) || x(z)      || f(right(z)))   bottom level
//! f(z) = h(l(z) || rank(z) || f(down(z)) || f(right(z)))  internal
//! f(z) = f(down(z))                                       internal, right(z) absent
//! ```
//!
//! with a fixed all-zero label standing in for an absent right child on
//! the bottom level. The pass-through rule for internal nodes without a
//! right child means such nodes contribute nothing to proofs; this keeps
//! verification paths short even when the head tower overtops the
//! tallest element tower by several levels. A read proof is the
//! verification path from the element's bottom node to the root, each
//! hashing node contributing the level, rank and label of its sibling
//! child plus a direction bit.
//!
//! Tower heights are derived from a digest of the element *at insertion
//! time* and kept for the lifetime of the slot (a modification replaces
//! the payload but not the height). This keeps the shape a deterministic
//! function of the slot list, so client and server independently agree
//! on the post-update structure and the client can predict the new root
//! label from read proofs alone.

use crate::crypto::{digest, DIGEST_LEN};
use crate::error::{Error, Result};
use crate::wire::{put_bytes, put_u32, put_u64, Cursor};

pub const ZERO_LABEL: [u8; DIGEST_LEN] = [0u8; DIGEST_LEN];

/// Label of a node from its fixed-width constituents. `left` is x(z) (a
/// digest of the element, or the zero label for the sentinel) on the
/// bottom level and f(down(z)) elsewhere; `right` is f(right(z)).
fn node_label(level: u8, rank: u64, left: &[u8; 32], right: &[u8; 32]) -> [u8; 32] {
    let mut buf = [0u8; 1 + 8 + 32 + 32];
    buf[0] = level;
    buf[1..9].copy_from_slice(&rank.to_be_bytes());
    buf[9..41].copy_from_slice(left);
    buf[41..73].copy_from_slice(right);
    digest(&buf)
}

/// Tower height for a newly inserted element: trailing zero bits of its
/// digest, capped. Geometric(1/2)-distributed, and computable by both
/// parties without coordination.
pub fn derive_height(element: &[u8], cap: u8) -> u8 {
    let d = digest(element);
    let mut n: u32 = 0;
    for byte in d.iter().rev() {
        if *byte == 0 {
            n += 8;
        } else {
            n += byte.trailing_zeros();
            break;
        }
        if n >= cap as u32 {
            break;
        }
    }
    n.min(cap as u32) as u8
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub element: Vec<u8>,
    pub height: u8,
}

#[derive(Debug, Clone)]
struct Node {
    level: u8,
    rank: u64,
    label: [u8; 32],
    right: Option<usize>,
    down: Option<usize>,
    /// Bottom-level element slot (0-based); None for internal nodes and
    /// the sentinel bottom.
    slot: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metadata {
    pub root_label: [u8; 32],
    pub m: u64,
}

impl Metadata {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40);
        out.extend_from_slice(&self.root_label);
        out.extend_from_slice(&self.m.to_be_bytes());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let mut root_label = [0u8; 32];
        root_label.copy_from_slice(c.take(32)?);
        let m = c.get_u64()?;
        Ok(Metadata { root_label, m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProofEntry {
    pub level: u8,
    pub sibling_rank: u64,
    pub direction: u8,
    pub sibling_label: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SkipListProof {
    pub entries: Vec<ProofEntry>,
}

impl SkipListProof {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.entries.len() * 42);
        put_u32(&mut out, self.entries.len() as u32);
        for e in &self.entries {
            out.push(e.level);
            put_u64(&mut out, e.sibling_rank);
            out.push(e.direction);
            out.extend_from_slice(&e.sibling_label);
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let p = Self::read_from(&mut c)?;
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after proof"));
        }
        Ok(p)
    }

    pub fn read_from(c: &mut Cursor) -> Result<Self> {
        let count = c.get_count()?;
        let mut entries = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let level = c.get_u8()?;
            let sibling_rank = c.get_u64()?;
            let direction = c.get_u8()?;
            if direction > 1 {
                return Err(Error::Malformed("bad direction bit"));
            }
            let mut sibling_label = [0u8; 32];
            sibling_label.copy_from_slice(c.take(32)?);
            entries.push(ProofEntry {
                level,
                sibling_rank,
                direction,
                sibling_label,
            });
        }
        Ok(SkipListProof { entries })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateType {
    Insert,
    Modify,
    Delete,
}

/// A served read: the element (None when the sentinel position 0 was
/// read) plus its path proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadResponse {
    pub element: Option<Vec<u8>>,
    pub proof: SkipListProof,
}

impl ReadResponse {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match &self.element {
            Some(e) => {
                out.push(1);
                put_u32(&mut out, e.len() as u32);
                out.extend_from_slice(e);
            }
            None => out.push(0),
        }
        out.extend_from_slice(&self.proof.encode());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        let element = match c.get_u8()? {
            0 => None,
            1 => {
                let len = c.get_count()?;
                Some(c.take(len)?.to_vec())
            }
            _ => return Err(Error::Malformed("bad element flag")),
        };
        let proof = SkipListProof::read_from(&mut c)?;
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after read response"));
        }
        Ok(ReadResponse { element, proof })
    }
}

#[derive(Debug, Clone)]
pub struct SkipList {
    level_cap: u8,
    slots: Vec<Slot>,
    nodes: Vec<Node>,
    root: usize,
}

impl SkipList {
    /// Build over an ordered list of elements; heights derived from the
    /// elements themselves.
    pub fn init(elements: Vec<Vec<u8>>, level_cap: u8) -> Self {
        let slots = elements
            .into_iter()
            .map(|element| {
                let height = derive_height(&element, level_cap);
                Slot { element, height }
            })
            .collect();
        Self::from_slots(slots, level_cap)
    }

    /// Rebuild from explicit (element, height) slots, e.g. after loading
    /// persisted state.
    pub fn from_slots(slots: Vec<Slot>, level_cap: u8) -> Self {
        let mut list = SkipList {
            level_cap,
            slots,
            nodes: Vec::new(),
            root: 0,
        };
        list.rebuild();
        list
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn level_cap(&self) -> u8 {
        self.level_cap
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn element(&self, i: usize) -> Result<&[u8]> {
        if i < 1 || i > self.slots.len() {
            return Err(Error::IndexOutOfRange(i));
        }
        Ok(&self.slots[i - 1].element)
    }

    pub fn root_rank(&self) -> u64 {
        self.nodes[self.root].rank
    }

    pub fn metadata(&self) -> Metadata {
        Metadata {
            root_label: self.nodes[self.root].label,
            m: self.slots.len() as u64,
        }
    }

    fn push_node(
        &mut self,
        level: u8,
        right: Option<usize>,
        down: Option<usize>,
        slot: Option<usize>,
    ) -> usize {
        let right_rank = right.map_or(0, |r| self.nodes[r].rank);
        let right_label = right.map_or(ZERO_LABEL, |r| self.nodes[r].label);
        let (rank, left_label) = if level == 0 {
            let x = slot.map_or(ZERO_LABEL, |s| digest(&self.slots[s].element));
            (right_rank + slot.is_some() as u64, x)
        } else {
            let d = down.expect("internal node without down child");
            (right_rank + self.nodes[d].rank, self.nodes[d].label)
        };
        let label = if level > 0 && right.is_none() {
            left_label // pass-through
        } else {
            node_label(level, rank, &left_label, &right_label)
        };
        self.nodes.push(Node {
            level,
            rank,
            label,
            right,
            down,
            slot,
        });
        self.nodes.len() - 1
    }

    /// Reconstruct the node arena from the slots. Right-to-left scan:
    /// `pending[k]` holds the plateau (tower-top) node at level k still
    /// waiting for its left parent; each tower adopts the pending
    /// plateaus at every level it spans.
    fn rebuild(&mut self) {
        self.nodes.clear();
        let top = self.slots.iter().map(|s| s.height).max().unwrap_or(0);
        let mut pending: Vec<Option<usize>> = vec![None; top as usize + 1];
        for p in (0..self.slots.len()).rev() {
            let h = self.slots[p].height;
            let mut below: Option<usize> = None;
            for k in 0..=h {
                let right = pending[k as usize].take();
                let idx = self.push_node(k, right, below, (k == 0).then_some(p));
                below = Some(idx);
            }
            pending[h as usize] = below;
        }
        // Sentinel head tower spans every level.
        let mut below: Option<usize> = None;
        for k in 0..=top {
            let right = pending[k as usize].take();
            let idx = self.push_node(k, right, below, None);
            below = Some(idx);
        }
        self.root = below.unwrap();
    }

    /// Verification path root→bottom for position `pos` (0 = sentinel
    /// bottom, 1..=m = elements).
    fn path_to(&self, pos: usize) -> Result<Vec<usize>> {
        if pos > self.slots.len() {
            return Err(Error::IndexOutOfRange(pos));
        }
        let mut path = Vec::new();
        let mut node = self.root;
        let mut remaining = pos as u64;
        loop {
            path.push(node);
            let n = &self.nodes[node];
            if n.level == 0 {
                match n.slot {
                    Some(_) if remaining == 1 => return Ok(path),
                    Some(_) => {
                        remaining -= 1;
                        node = n.right.expect("ran off bottom level");
                    }
                    None if remaining == 0 => return Ok(path),
                    None => node = n.right.expect("ran off bottom level"),
                }
            } else {
                let down = n.down.expect("internal node without down child");
                let dr = self.nodes[down].rank;
                if remaining <= dr {
                    node = down;
                } else {
                    remaining -= dr;
                    node = n.right.expect("search overran right edge");
                }
            }
        }
    }

    fn sibling_of(&self, idx: Option<usize>) -> (u64, [u8; 32]) {
        match idx {
            Some(i) => (self.nodes[i].rank, self.nodes[i].label),
            None => (0, ZERO_LABEL),
        }
    }

    /// Proof for position `pos` (0 = sentinel), entries bottom-to-root.
    pub fn path_proof(&self, pos: usize) -> Result<SkipListProof> {
        let path = self.path_to(pos)?;
        let mut entries = Vec::with_capacity(path.len());
        // z_1 carries its own right child.
        let z1 = &self.nodes[*path.last().unwrap()];
        let (q, g) = self.sibling_of(z1.right);
        entries.push(ProofEntry {
            level: 0,
            sibling_rank: q,
            direction: 1,
            sibling_label: g,
        });
        for w in path.windows(2).rev() {
            let (z, prev) = (&self.nodes[w[0]], w[1]);
            let (direction, q, g) = if z.down == Some(prev) {
                if z.right.is_none() {
                    continue; // pass-through node, nothing to prove
                }
                let (q, g) = self.sibling_of(z.right);
                (0u8, q, g)
            } else {
                debug_assert_eq!(z.right, Some(prev));
                // Sibling is the down child; on the bottom level that
                // role is played by x(z) with the node's own unit count.
                let (q, g) = if z.level == 0 {
                    match z.slot {
                        Some(s) => (1, digest(&self.slots[s].element)),
                        None => (0, ZERO_LABEL),
                    }
                } else {
                    self.sibling_of(z.down)
                };
                (1u8, q, g)
            };
            entries.push(ProofEntry {
                level: z.level,
                sibling_rank: q,
                direction,
                sibling_label: g,
            });
        }
        Ok(SkipListProof { entries })
    }

    /// Read the i-th element (1-based) with its proof.
    pub fn auth_read(&self, i: usize) -> Result<(Vec<u8>, SkipListProof)> {
        if i < 1 || i > self.slots.len() {
            return Err(Error::IndexOutOfRange(i));
        }
        Ok((self.slots[i - 1].element.clone(), self.path_proof(i)?))
    }

    /// Read response for position 0..=m, position 0 meaning the sentinel
    /// (used as the anchor when deleting the first element).
    pub fn read_response(&self, pos: usize) -> Result<ReadResponse> {
        Ok(ReadResponse {
            element: if pos == 0 {
                None
            } else {
                Some(self.element(pos)?.to_vec())
            },
            proof: self.path_proof(pos)?,
        })
    }

    /// Apply an update and return the read of the affected position in
    /// the new structure (insert → i+1, modify → i, delete → i−1), as a
    /// full read response so the client replays it element and all.
    pub fn perform_update(
        &mut self,
        i: usize,
        updtype: UpdateType,
        new_element: Option<&[u8]>,
    ) -> Result<ReadResponse> {
        let m = self.slots.len();
        match updtype {
            UpdateType::Insert => {
                if i > m {
                    return Err(Error::IndexOutOfRange(i));
                }
                let element = new_element
                    .ok_or(Error::Malformed("insert without element"))?
                    .to_vec();
                let height = derive_height(&element, self.level_cap);
                self.slots.insert(i, Slot { element, height });
                self.rebuild();
                self.read_response(i + 1)
            }
            UpdateType::Modify => {
                if i < 1 || i > m {
                    return Err(Error::IndexOutOfRange(i));
                }
                let element = new_element
                    .ok_or(Error::Malformed("modify without element"))?
                    .to_vec();
                self.slots[i - 1].element = element; // height kept
                self.rebuild();
                self.read_response(i)
            }
            UpdateType::Delete => {
                if i < 1 || i > m {
                    return Err(Error::IndexOutOfRange(i));
                }
                self.slots.remove(i - 1);
                self.rebuild();
                self.read_response(i - 1)
            }
        }
    }

    /// Persisted form: version, level cap, then (height, element) per
    /// slot. The arena is rebuilt on load.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, 1);
        out.push(self.level_cap);
        put_u32(&mut out, self.slots.len() as u32);
        for s in &self.slots {
            out.push(s.height);
            put_bytes(&mut out, &s.element);
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut c = Cursor::new(buf);
        if c.get_u32()? != 1 {
            return Err(Error::Malformed("unknown skip list version"));
        }
        let level_cap = c.get_u8()?;
        let count = c.get_count()?;
        let mut slots = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let height = c.get_u8()?;
            let element = c.get_bytes()?.to_vec();
            slots.push(Slot { element, height });
        }
        if !c.done() {
            return Err(Error::Malformed("trailing bytes after skip list"));
        }
        Ok(Self::from_slots(slots, level_cap))
    }

    /// Full structural self-check: recompute every rank and label from
    /// children and recount reachable bottom elements per node.
    pub fn check_invariants(&self) -> Result<()> {
        for (idx, n) in self.nodes.iter().enumerate() {
            let right_rank = n.right.map_or(0, |r| self.nodes[r].rank);
            let right_label = n.right.map_or(ZERO_LABEL, |r| self.nodes[r].label);
            let (rank, left) = if n.level == 0 {
                if n.down.is_some() {
                    return Err(Error::Malformed("bottom node with down child"));
                }
                let x = n.slot.map_or(ZERO_LABEL, |s| digest(&self.slots[s].element));
                (right_rank + n.slot.is_some() as u64, x)
            } else {
                let d = n.down.ok_or(Error::Malformed("internal node without down"))?;
                if self.nodes[d].level != n.level - 1 {
                    return Err(Error::Malformed("down child level mismatch"));
                }
                (right_rank + self.nodes[d].rank, self.nodes[d].label)
            };
            if rank != n.rank {
                return Err(Error::Malformed("rank recomputation mismatch"));
            }
            let want = if n.level > 0 && n.right.is_none() {
                left // pass-through
            } else {
                node_label(n.level, rank, &left, &right_label)
            };
            if want != n.label {
                return Err(Error::Malformed("label recomputation mismatch"));
            }
            if let Some(r) = n.right {
                if self.nodes[r].level != n.level {
                    return Err(Error::Malformed("right child level mismatch"));
                }
            }
            // Brute-force recount of reachable element bottoms.
            let mut count = 0u64;
            let mut stack = vec![idx];
            while let Some(v) = stack.pop() {
                let node = &self.nodes[v];
                if node.level == 0 && node.slot.is_some() {
                    count += 1;
                }
                stack.extend(node.right);
                stack.extend(node.down);
            }
            if count != n.rank {
                return Err(Error::Malformed("reachability recount mismatch"));
            }
        }
        if self.nodes[self.root].rank != self.slots.len() as u64 {
            return Err(Error::Malformed("root rank != m"));
        }
        Ok(())
    }
}

/// One reconstructed node along a replayed path.
#[derive(Debug, Clone, Copy)]
struct Step {
    rank: u64,
    label: [u8; 32],
}

/// Result of replaying a proof bottom-up: per-entry reconstructed
/// (level, rank, label) plus the element position implied by the rank
/// arithmetic.
struct Replay {
    steps: Vec<Step>,
    pos: u64,
}

impl Replay {
    fn top(&self) -> &Step {
        self.steps.last().unwrap()
    }
}

/// Rebuild labels bottom-up from (element, proof). `x` is the digest of
/// the element, or None when the path targets the sentinel bottom.
fn replay(x: Option<[u8; 32]>, proof: &SkipListProof) -> Result<Replay> {
    let e0 = proof
        .entries
        .first()
        .ok_or(Error::Malformed("empty proof"))?;
    if e0.level != 0 || e0.direction != 1 {
        return Err(Error::Malformed("proof must start at a bottom node"));
    }
    let unit = x.is_some() as u64;
    let mut rank = unit + e0.sibling_rank;
    let mut label = node_label(0, rank, &x.unwrap_or(ZERO_LABEL), &e0.sibling_label);
    let mut pos = unit;
    let mut steps = vec![Step { rank, label }];
    let mut prev_level = 0u8;
    for e in &proof.entries[1..] {
        if e.level < prev_level {
            return Err(Error::Malformed("proof levels must not decrease"));
        }
        if e.direction == 0 {
            if e.level == 0 {
                return Err(Error::Malformed("bottom node has no down child"));
            }
            rank += e.sibling_rank;
            label = node_label(e.level, rank, &label, &e.sibling_label);
        } else {
            rank += e.sibling_rank;
            pos += e.sibling_rank;
            label = node_label(e.level, rank, &e.sibling_label, &label);
        }
        steps.push(Step { rank, label });
        prev_level = e.level;
    }
    Ok(Replay { steps, pos })
}

fn replay_checked(
    pos: usize,
    metadata: &Metadata,
    element: Option<&[u8]>,
    proof: &SkipListProof,
) -> Result<Replay> {
    let r = replay(element.map(digest), proof)?;
    let top = r.top();
    if top.label != metadata.root_label || top.rank != metadata.m || r.pos != pos as u64 {
        return Err(Error::StaleProof);
    }
    Ok(r)
}

/// Verify a read of the i-th element against the trusted metadata.
pub fn list_verify_read(
    i: usize,
    metadata: &Metadata,
    element: &[u8],
    proof: &SkipListProof,
) -> bool {
    i >= 1 && replay_checked(i, metadata, Some(element), proof).is_ok()
}

/// Verify a read response for position 0..=m (position 0 = sentinel).
pub fn verify_read_response(pos: usize, metadata: &Metadata, resp: &ReadResponse) -> bool {
    match (&resp.element, pos) {
        (None, 0) => replay_checked(0, metadata, None, &resp.proof).is_ok(),
        (Some(e), p) if p >= 1 => replay_checked(p, metadata, Some(e), &resp.proof).is_ok(),
        _ => false,
    }
}

/// Descend points of a verified path: for each level k with a hashing
/// descend node, the sibling (rank, label) of the last path node at that
/// level — i.e. the right child that a tower inserted just after the
/// path's target would capture. Levels without an entry had no right
/// child there (pass-through), so there is nothing to capture.
fn descend_siblings(proof: &SkipListProof) -> Vec<(u8, u64, [u8; 32])> {
    let mut out = Vec::new();
    let e0 = &proof.entries[0];
    out.push((0u8, e0.sibling_rank, e0.sibling_label));
    for e in &proof.entries[1..] {
        if e.direction == 0 {
            out.push((e.level, e.sibling_rank, e.sibling_label));
        }
    }
    out
}

fn cap_lookup(caps: &[(u8, u64, [u8; 32])], level: u8) -> Option<(u64, [u8; 32])> {
    caps.iter()
        .find(|(l, _, _)| *l == level)
        .map(|(_, q, g)| (*q, *g))
}

/// Predict the root label after inserting `new_element` right after
/// position i, from the verified read proof of position i.
fn predict_insert(
    i: usize,
    metadata: &Metadata,
    anchor: &ReadResponse,
    new_element: &[u8],
    level_cap: u8,
) -> Result<Metadata> {
    if !verify_read_response(i, metadata, anchor) {
        return Err(Error::StaleProof);
    }
    let caps = descend_siblings(&anchor.proof);
    let lvl = derive_height(new_element, level_cap);

    // Labels of the new tower, bottom-up; at each level it captures the
    // right child of the path's descend point, or passes through when
    // that descend point had none.
    let (q0, g0) = (caps[0].1, caps[0].2);
    let mut n_rank = 1 + q0;
    let mut n_label = node_label(0, n_rank, &digest(new_element), &g0);
    for k in 1..=lvl {
        if let Some((q, g)) = cap_lookup(&caps, k) {
            n_rank += q;
            n_label = node_label(k, n_rank, &n_label, &g);
        }
    }

    // Re-walk the old path with the seam changes applied. Descend points
    // below the new tower lose their right child to it and become
    // pass-through; the descend point at the tower's height adopts the
    // new plateau — splicing a fresh hash in if it had no right child
    // before (including the case of a tower overtopping the whole list).
    let entries = &anchor.proof.entries;
    let x = anchor.element.as_deref().map(digest);
    let unit = x.is_some() as u64;
    let (sib_q, sib_g) = if lvl == 0 {
        (n_rank, n_label)
    } else {
        (0, ZERO_LABEL)
    };
    let mut rank = unit + sib_q;
    let mut label = node_label(0, rank, &x.unwrap_or(ZERO_LABEL), &sib_g);
    let mut placed = lvl == 0;
    for e in &entries[1..] {
        if !placed && (e.level > lvl || (e.level == lvl && e.direction == 1)) {
            rank += n_rank;
            label = node_label(lvl, rank, &label, &n_label);
            placed = true;
        }
        if e.direction == 0 {
            if e.level < lvl {
                continue; // right child captured by the new tower
            }
            if e.level == lvl {
                rank += n_rank;
                label = node_label(lvl, rank, &label, &n_label);
                placed = true;
                continue;
            }
            rank += e.sibling_rank;
            label = node_label(e.level, rank, &label, &e.sibling_label);
        } else {
            rank += e.sibling_rank;
            label = node_label(e.level, rank, &e.sibling_label, &label);
        }
    }
    if !placed {
        rank += n_rank;
        label = node_label(lvl, rank, &label, &n_label);
    }
    if rank != metadata.m + 1 {
        return Err(Error::StaleProof);
    }
    Ok(Metadata {
        root_label: label,
        m: metadata.m + 1,
    })
}

/// Predict the root label after replacing the i-th element (height kept,
/// shape unchanged) from the verified read proof of i.
fn predict_modify(
    i: usize,
    metadata: &Metadata,
    anchor: &ReadResponse,
    new_element: &[u8],
) -> Result<Metadata> {
    if i < 1 || anchor.element.is_none() || !verify_read_response(i, metadata, anchor) {
        return Err(Error::StaleProof);
    }
    let r = replay(Some(digest(new_element)), &anchor.proof)?;
    Ok(Metadata {
        root_label: r.top().label,
        m: metadata.m,
    })
}

/// Predict the root label after deleting the i-th element. Needs the
/// verified read proof of the anchor i−1 (sentinel when i = 1) and of
/// the victim i itself; the victim path supplies the right children its
/// tower releases, the anchor path the nodes that adopt them.
fn predict_delete(
    i: usize,
    metadata: &Metadata,
    anchor: &ReadResponse,
    victim: &ReadResponse,
) -> Result<Metadata> {
    if !verify_read_response(i - 1, metadata, anchor) {
        return Err(Error::StaleProof);
    }
    if !verify_read_response(i, metadata, victim) {
        return Err(Error::StaleProof);
    }
    let vic = replay(victim.element.as_deref().map(digest), &victim.proof)?;
    let ve = &victim.proof.entries;

    // Victim tower: the path climbs it with direction-0 entries (one per
    // tower level that has a right child) until the plateau's parent,
    // the first direction-1 entry above z_1. Its level is the tower
    // height; the reconstructed step just below it is the plateau.
    let t = ve[1..]
        .iter()
        .position(|e| e.direction == 1)
        .map(|p| p + 1)
        .ok_or(Error::StaleProof)?;
    let h = ve[t].level;
    let mut released: Vec<Option<(u64, [u8; 32])>> = vec![None; h as usize + 1];
    released[0] = Some((ve[0].sibling_rank, ve[0].sibling_label));
    let mut prev = 0u8;
    for e in &ve[1..t] {
        if e.level <= prev || e.level > h {
            return Err(Error::StaleProof);
        }
        released[e.level as usize] = Some((e.sibling_rank, e.sibling_label));
        prev = e.level;
    }
    let plateau = vic.steps[t - 1];

    // Re-walk the anchor path. The descend point at each level 1..=h
    // adopts the victim's released right child at that level: a fresh
    // hash spliced in where the node had no right child before (it was
    // pass-through, hence absent from the proof), or nothing when the
    // victim released none. The only anchor descend entry at a level
    // <= h must be the one at level h whose sibling is the victim
    // plateau; anything else means the two proofs disagree.
    let ae = &anchor.proof.entries;
    let x = anchor.element.as_deref().map(digest);
    let unit = x.is_some() as u64;
    let (oq, og) = if h == 0 {
        (plateau.rank, plateau.label)
    } else {
        (0, ZERO_LABEL)
    };
    if ae[0].sibling_rank != oq || ae[0].sibling_label != og {
        return Err(Error::StaleProof);
    }
    let (q0, g0) = released[0].unwrap();
    let mut rank = unit + q0;
    let mut label = node_label(0, rank, &x.unwrap_or(ZERO_LABEL), &g0);
    let mut next_adopt: u32 = 1;
    let mut seam_done = h == 0;
    for e in &ae[1..] {
        while next_adopt <= h as u32
            && ((e.level as u32) > next_adopt
                || (e.level as u32 == next_adopt && e.direction == 1))
        {
            if let Some((q, g)) = released[next_adopt as usize] {
                rank += q;
                label = node_label(next_adopt as u8, rank, &label, &g);
            }
            next_adopt += 1;
        }
        if e.direction == 0 && e.level <= h {
            if e.level != h
                || seam_done
                || e.sibling_rank != plateau.rank
                || e.sibling_label != plateau.label
            {
                return Err(Error::StaleProof);
            }
            if let Some((q, g)) = released[h as usize] {
                rank += q;
                label = node_label(h, rank, &label, &g);
            }
            next_adopt = h as u32 + 1;
            seam_done = true;
        } else {
            rank += e.sibling_rank;
            label = if e.direction == 0 {
                node_label(e.level, rank, &label, &e.sibling_label)
            } else {
                node_label(e.level, rank, &e.sibling_label, &label)
            };
        }
    }
    if !seam_done || rank != metadata.m - 1 {
        return Err(Error::StaleProof);
    }
    Ok(Metadata {
        root_label: label,
        m: metadata.m - 1,
    })
}

/// Client side of an update: verify the server-provided read proof(s)
/// and compute the metadata the structure must have afterwards.
/// `anchor` is the read of position i (insert/modify) or i−1 (delete);
/// `victim` is the read of position i, required for delete only.
pub fn list_init_update(
    i: usize,
    updtype: UpdateType,
    metadata: &Metadata,
    new_element: Option<&[u8]>,
    anchor: &ReadResponse,
    victim: Option<&ReadResponse>,
    level_cap: u8,
) -> Result<Metadata> {
    let m = metadata.m as usize;
    match updtype {
        UpdateType::Insert => {
            if i > m {
                return Err(Error::IndexOutOfRange(i));
            }
            let e = new_element.ok_or(Error::Malformed("insert without element"))?;
            predict_insert(i, metadata, anchor, e, level_cap)
        }
        UpdateType::Modify => {
            if i < 1 || i > m {
                return Err(Error::IndexOutOfRange(i));
            }
            let e = new_element.ok_or(Error::Malformed("modify without element"))?;
            predict_modify(i, metadata, anchor, e)
        }
        UpdateType::Delete => {
            if i < 1 || i > m {
                return Err(Error::IndexOutOfRange(i));
            }
            let v = victim.ok_or(Error::Malformed("delete without victim proof"))?;
            predict_delete(i, metadata, anchor, v)
        }
    }
}

/// Check the server's post-update read response against the predicted
/// metadata. The element the server reports at the affected position
/// must be the one the client asked to place there (the new element for
/// insert/modify, the untouched anchor element at i−1 for delete), and
/// the proof must replay to the predicted root.
pub fn list_verify_update(
    i: usize,
    updtype: UpdateType,
    new_element: Option<&[u8]>,
    prior_anchor_element: Option<&[u8]>,
    expected: &Metadata,
    response: &ReadResponse,
) -> bool {
    let (pos, want) = match updtype {
        UpdateType::Insert => (i + 1, new_element),
        UpdateType::Modify => (i, new_element),
        UpdateType::Delete => {
            if i < 1 {
                return false;
            }
            (i - 1, prior_anchor_element)
        }
    };
    response.element.as_deref() == want && verify_read_response(pos, expected, response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn rand_elems(n: usize, r: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
        (0..n)
            .map(|_| {
                let len = r.gen_range(4..24);
                (0..len).map(|_| r.gen()).collect()
            })
            .collect()
    }

    #[test]
    fn empty_list_root_label_by_hand() {
        let list = SkipList::init(vec![], 32);
        let md = list.metadata();
        assert_eq!(md.m, 0);
        assert_eq!(md.root_label, node_label(0, 0, &ZERO_LABEL, &ZERO_LABEL));
    }

    #[test]
    fn single_element_root_label_by_hand() {
        // Independent re-derivation of every label on the two-tower
        // structure straight from the label recurrence.
        let t1 = b"tag-one".to_vec();
        let list = SkipList::init(vec![t1.clone()], 32);
        let h1 = derive_height(&t1, 32);

        // The element tower has no right children, so every internal
        // node passes its base label straight through.
        let v = node_label(0, 1, &digest(&t1), &ZERO_LABEL);
        let head = if h1 == 0 {
            node_label(0, 1, &ZERO_LABEL, &v)
        } else {
            // Head levels below h1 pass through; level h1 hashes the
            // tower plateau.
            let base = node_label(0, 0, &ZERO_LABEL, &ZERO_LABEL);
            node_label(h1, 1, &base, &v)
        };
        assert_eq!(list.metadata().root_label, head);
        assert_eq!(list.metadata().m, 1);
    }

    #[test]
    fn nine_element_root_rank_is_nine() {
        let mut r = rng(1);
        let list = SkipList::init(rand_elems(9, &mut r), 32);
        assert_eq!(list.root_rank(), 9);
        list.check_invariants().unwrap();
    }

    #[test]
    fn invariants_hold_across_sizes() {
        let mut r = rng(2);
        for m in [0usize, 1, 2, 3, 7, 16, 33, 100] {
            let list = SkipList::init(rand_elems(m, &mut r), 32);
            list.check_invariants().unwrap();
            assert_eq!(list.metadata().m, m as u64);
        }
    }

    #[test]
    fn every_read_verifies() {
        let mut r = rng(3);
        for m in [1usize, 2, 5, 17, 64] {
            let list = SkipList::init(rand_elems(m, &mut r), 32);
            let md = list.metadata();
            for i in 1..=m {
                let (e, p) = list.auth_read(i).unwrap();
                assert!(list_verify_read(i, &md, &e, &p), "m={m} i={i}");
            }
            // Sentinel path verifies too.
            assert!(verify_read_response(
                0,
                &md,
                &list.read_response(0).unwrap()
            ));
        }
    }

    #[test]
    fn out_of_range_reads_rejected() {
        let mut r = rng(4);
        let list = SkipList::init(rand_elems(3, &mut r), 32);
        assert!(matches!(list.auth_read(0), Err(Error::IndexOutOfRange(0))));
        assert!(matches!(list.auth_read(4), Err(Error::IndexOutOfRange(4))));
    }

    #[test]
    fn tampered_element_or_proof_rejected() {
        let mut r = rng(5);
        let list = SkipList::init(rand_elems(20, &mut r), 32);
        let md = list.metadata();
        for _ in 0..200 {
            let i = r.gen_range(1..=20);
            let (mut e, mut p) = list.auth_read(i).unwrap();
            match r.gen_range(0..4) {
                0 => {
                    let b = r.gen_range(0..e.len());
                    e[b] ^= 1 << r.gen_range(0..8);
                }
                1 => {
                    let t = r.gen_range(0..p.entries.len());
                    let b = r.gen_range(0..32);
                    p.entries[t].sibling_label[b] ^= 1 << r.gen_range(0..8);
                }
                2 => {
                    let t = r.gen_range(0..p.entries.len());
                    p.entries[t].sibling_rank ^= 1;
                }
                _ => {
                    p.entries.pop();
                }
            }
            assert!(!list_verify_read(i, &md, &e, &p));
        }
    }

    #[test]
    fn positional_binding_all_pairs() {
        let mut r = rng(6);
        let m = 32;
        let list = SkipList::init(rand_elems(m, &mut r), 32);
        let md = list.metadata();
        for i in 1..=m {
            let (e, p) = list.auth_read(i).unwrap();
            for j in 1..=m {
                assert_eq!(list_verify_read(j, &md, &e, &p), i == j);
            }
        }
    }

    #[test]
    fn proof_wire_round_trip() {
        let mut r = rng(7);
        let list = SkipList::init(rand_elems(40, &mut r), 32);
        for i in [1usize, 17, 40] {
            let (_, p) = list.auth_read(i).unwrap();
            assert_eq!(SkipListProof::decode(&p.encode()).unwrap(), p);
        }
        assert!(SkipListProof::decode(&[0, 0, 0, 2, 9]).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let mut r = rng(8);
        let list = SkipList::init(rand_elems(25, &mut r), 32);
        let loaded = SkipList::decode(&list.encode()).unwrap();
        assert_eq!(loaded.metadata(), list.metadata());
        assert_eq!(loaded.slots(), list.slots());
        loaded.check_invariants().unwrap();
    }

    #[test]
    fn stale_proof_fails_after_update() {
        let mut r = rng(9);
        let mut list = SkipList::init(rand_elems(10, &mut r), 32);
        let (e, p) = list.auth_read(4).unwrap();
        list.perform_update(4, UpdateType::Modify, Some(b"fresh"))
            .unwrap();
        let md = list.metadata();
        assert!(!list_verify_read(4, &md, &e, &p));
    }

    fn run_client_update(
        list: &mut SkipList,
        md: &Metadata,
        i: usize,
        updtype: UpdateType,
        new_element: Option<&[u8]>,
    ) -> Metadata {
        let anchor_pos = match updtype {
            UpdateType::Delete => i - 1,
            _ => i,
        };
        let anchor = list.read_response(anchor_pos).unwrap();
        let victim = matches!(updtype, UpdateType::Delete)
            .then(|| list.read_response(i).unwrap());
        let expected = list_init_update(
            i,
            updtype,
            md,
            new_element,
            &anchor,
            victim.as_ref(),
            list.level_cap(),
        )
        .unwrap();
        let response = list.perform_update(i, updtype, new_element).unwrap();
        assert!(list_verify_update(
            i,
            updtype,
            new_element,
            anchor.element.as_deref(),
            &expected,
            &response,
        ));
        assert_eq!(expected, list.metadata(), "prediction != server state");
        expected
    }

    #[test]
    fn fuzz_updates_with_client_prediction() {
        let mut r = rng(10);
        let mut list = SkipList::init(rand_elems(8, &mut r), 32);
        let mut md = list.metadata();
        for step in 0..400 {
            let m = md.m as usize;
            let fresh: Vec<u8> = (0..r.gen_range(4..16)).map(|_| r.gen()).collect();
            let (i, updtype, elem) = match r.gen_range(0..3) {
                0 => (r.gen_range(0..=m), UpdateType::Insert, Some(&fresh[..])),
                1 if m > 0 => (r.gen_range(1..=m), UpdateType::Modify, Some(&fresh[..])),
                _ if m > 0 => (r.gen_range(1..=m), UpdateType::Delete, None),
                _ => (0, UpdateType::Insert, Some(&fresh[..])),
            };
            md = run_client_update(&mut list, &md, i, updtype, elem);
            if step % 25 == 0 {
                list.check_invariants().unwrap();
                let rebuilt = SkipList::from_slots(list.slots().to_vec(), 32);
                assert_eq!(rebuilt.metadata(), list.metadata());
            }
        }
    }

    #[test]
    fn modify_same_element_keeps_root() {
        let mut r = rng(11);
        let mut list = SkipList::init(rand_elems(6, &mut r), 32);
        let md = list.metadata();
        let same = list.element(3).unwrap().to_vec();
        let after = run_client_update(&mut list, &md, 3, UpdateType::Modify, Some(&same));
        assert_eq!(after, md);
    }

    #[test]
    fn insert_then_delete_restores_root() {
        let mut r = rng(12);
        let mut list = SkipList::init(rand_elems(8, &mut r), 32);
        let md0 = list.metadata();
        let md1 = run_client_update(&mut list, &md0, 8, UpdateType::Insert, Some(b"extra"));
        assert_eq!(md1.m, 9);
        let md2 = run_client_update(&mut list, &md1, 9, UpdateType::Delete, None);
        assert_eq!(md2, md0);
    }

    #[test]
    fn delete_down_to_empty() {
        let mut r = rng(13);
        let mut list = SkipList::init(rand_elems(3, &mut r), 32);
        let mut md = list.metadata();
        for _ in 0..3 {
            md = run_client_update(&mut list, &md, 1, UpdateType::Delete, None);
        }
        assert_eq!(md.m, 0);
        assert_eq!(md, SkipList::init(vec![], 32).metadata());
    }

    #[test]
    fn adversarial_server_is_caught() {
        let mut r = rng(14);
        let base = SkipList::init(rand_elems(12, &mut r), 32);
        let md = base.metadata();
        let anchor = base.read_response(5).unwrap();
        let expected = list_init_update(
            5,
            UpdateType::Modify,
            &md,
            Some(b"new-content"),
            &anchor,
            None,
            32,
        )
        .unwrap();

        // Server skips the update and replays the pre-update read.
        let lazy = base.clone();
        let stale = lazy.read_response(5).unwrap();
        assert!(!list_verify_update(
            5,
            UpdateType::Modify,
            Some(b"new-content"),
            None,
            &expected,
            &stale,
        ));

        // Server applies the update at the wrong index.
        let mut wrong = base.clone();
        wrong
            .perform_update(6, UpdateType::Modify, Some(b"new-content"))
            .unwrap();
        let p = wrong.read_response(5).unwrap();
        assert!(!list_verify_update(
            5,
            UpdateType::Modify,
            Some(b"new-content"),
            None,
            &expected,
            &p,
        ));
    }

    #[test]
    fn stale_anchor_rejected_at_init_update() {
        let mut r = rng(15);
        let mut list = SkipList::init(rand_elems(10, &mut r), 32);
        let md = list.metadata();
        let old_anchor = list.read_response(4).unwrap();
        list.perform_update(2, UpdateType::Modify, Some(b"x")).unwrap();
        let new_md = list.metadata();
        assert!(matches!(
            list_init_update(
                4,
                UpdateType::Modify,
                &new_md,
                Some(b"y"),
                &old_anchor,
                None,
                32
            ),
            Err(Error::StaleProof)
        ));
        let _ = md;
    }

    #[test]
    fn proof_length_logarithmic() {
        let mut r = rng(99);
        let m = 1usize << 14;
        let elems: Vec<Vec<u8>> = (0..m)
            .map(|_| (0..12).map(|_| r.gen()).collect())
            .collect();
        let list = SkipList::init(elems, 32);
        let bound = 3 * 14; // 3 * log2(m)
        let ok = (1..=m)
            .filter(|&i| list.path_proof(i).unwrap().entries.len() <= bound)
            .count();
        assert!(ok as f64 >= 0.99 * m as f64, "{ok}/{m}");
    }

    #[test]
    fn derive_height_is_geometricish() {
        let mut r = rng(17);
        let mut hist = [0usize; 40];
        for _ in 0..4000 {
            let e: Vec<u8> = (0..12).map(|_| r.gen()).collect();
            hist[derive_height(&e, 32) as usize] += 1;
        }
        // About half the mass at height 0, a quarter at 1.
        assert!(hist[0] > 1700 && hist[0] < 2300, "{}", hist[0]);
        assert!(hist[1] > 800 && hist[1] < 1200, "{}", hist[1]);
    }
}
