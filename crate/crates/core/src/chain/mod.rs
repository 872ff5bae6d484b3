//! Blocks, chains and proof-of-work mining.
//!
//! A block is the quadruple `<s, x, ctr, y>`: the link `s` to its predecessor,
//! the payload `x`, the PoW counter `ctr`, and the old state `y` holding the
//! digest(s) of the block's original data. Heights are 1-based throughout the
//! public API; height 1 is genesis.

mod dump;
mod validate;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashcore::{encode_fields, hash_g, hash_h, meets_target, Digest, DifficultyTarget};

pub use dump::{read_chain, write_chain, BlockRecord, ChainHeader, DumpError, PayloadRecord};
pub use validate::{
    validate_block, validate_block_ext, validate_chain, validate_chain_ext,
    validate_chain_immutable, ChainFault, FaultKind, PayloadRules, Structural, Validator,
};

/// Which family of validation algorithms a chain follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One old-state segment per block.
    #[default]
    Single,
    /// Old state carries the full redaction history.
    Ext,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Mode::Single),
            "ext" => Ok(Mode::Ext),
            other => Err(format!("unknown mode `{other}` (expected single|ext)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("chain is empty")]
    EmptyChain,
    #[error("old state must have at least one segment")]
    EmptyOldState,
    #[error("block at height {0} does not exist")]
    NoSuchHeight(usize),
}

/// Application data plus the vote tokens embedded in a block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BlockPayload {
    pub entries: Vec<Vec<u8>>,
    pub votes: Vec<Digest>,
}

impl BlockPayload {
    pub fn new(entries: Vec<Vec<u8>>, votes: Vec<Digest>) -> Self {
        BlockPayload { entries, votes }
    }

    pub fn from_entries<I, E>(entries: I) -> Self
    where
        I: IntoIterator<Item = E>,
        E: Into<Vec<u8>>,
    {
        BlockPayload {
            entries: entries.into_iter().map(Into::into).collect(),
            votes: Vec::new(),
        }
    }

    /// The byte image fed to `G`: `enc(enc(entries), enc(votes))`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let entries = encode_fields(&self.entries);
        let votes = encode_fields(&self.votes);
        encode_fields(&[entries, votes])
    }

    pub fn contains_vote(&self, token: &Digest) -> bool {
        self.votes.contains(token)
    }

    pub fn has_duplicate_votes(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.votes.len());
        !self.votes.iter().all(|v| seen.insert(*v))
    }
}

/// `y^(1) || ... || y^(l)`; `y^(1)` is the digest of the never-redacted data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OldState {
    segments: Vec<Digest>,
}

impl OldState {
    pub fn single(d: Digest) -> Self {
        OldState { segments: vec![d] }
    }

    pub fn from_segments(segments: Vec<Digest>) -> Result<Self, ChainError> {
        if segments.is_empty() {
            return Err(ChainError::EmptyOldState);
        }
        Ok(OldState { segments })
    }

    pub fn segments(&self) -> &[Digest] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn original(&self) -> &Digest {
        &self.segments[0]
    }

    pub fn last(&self) -> &Digest {
        self.segments.last().expect("old state is non-empty")
    }

    /// Concatenation of the first `n` segments.
    pub fn prefix_bytes(&self, n: usize) -> Vec<u8> {
        self.segments[..n].iter().flat_map(|d| d.0).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.prefix_bytes(self.segments.len())
    }

    /// Returns a copy with `d` appended.
    pub fn appended(&self, d: Digest) -> Self {
        let mut segments = self.segments.clone();
        segments.push(d);
        OldState { segments }
    }

    /// Mutable access for fault-injection fixtures.
    pub fn segments_mut(&mut self) -> &mut Vec<Digest> {
        &mut self.segments
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub s: Digest,
    pub payload: BlockPayload,
    pub ctr: u64,
    pub y: OldState,
}

impl Block {
    /// `G(s, x)`.
    pub fn data_digest(&self) -> Digest {
        data_digest(&self.s, &self.payload)
    }

    /// `H(ctr, G(s, x), y)`: the value a successor stores in `s`, and the
    /// vote token of a candidate block.
    pub fn link_digest(&self) -> Digest {
        self.link_digest_with(&self.data_digest())
    }

    pub(crate) fn link_digest_with(&self, g: &Digest) -> Digest {
        hash_h(&[&self.ctr.to_le_bytes(), g.as_ref(), &self.y.to_bytes()])
    }

    /// `H(ctr, y^(1), y^(1))`: the link as it stood before any redaction.
    pub fn old_link_digest(&self) -> Digest {
        let y1 = self.y.original();
        hash_h(&[&self.ctr.to_le_bytes(), y1.as_ref(), y1.as_ref()])
    }

    /// `H(ctr, y, y)` over the full old state, as written in the
    /// single-redaction algorithms.
    pub fn old_link_digest_full(&self) -> Digest {
        let y = self.y.to_bytes();
        hash_h(&[&self.ctr.to_le_bytes(), &y, &y])
    }

    /// True iff the block carries its creation-time data.
    pub fn is_unredacted(&self) -> bool {
        self.y.len() == 1 && *self.y.original() == self.data_digest()
    }

    /// Stable identity across redactions: the same for a block and every
    /// edited version of it.
    pub fn identity(&self) -> Digest {
        self.old_link_digest()
    }

    /// Digest over every field, data included; distinguishes versions.
    pub fn version_digest(&self) -> Digest {
        hash_h(&[
            self.s.as_ref(),
            &self.payload.canonical_bytes(),
            &self.ctr.to_le_bytes(),
            &self.y.to_bytes(),
        ])
    }
}

pub fn data_digest(s: &Digest, payload: &BlockPayload) -> Digest {
    hash_g(&[s.as_ref(), &payload.canonical_bytes()])
}

/// Builds the genesis block: `s` = zero, `ctr` = 0, `y = [G(s, payload)]`.
pub fn genesis_block(payload: BlockPayload) -> Block {
    let s = Digest::ZERO;
    let g = data_digest(&s, &payload);
    Block {
        s,
        payload,
        ctr: 0,
        y: OldState::single(g),
    }
}

pub fn default_genesis() -> Block {
    genesis_block(BlockPayload::from_entries([b"genesis".to_vec()]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
    difficulty: DifficultyTarget,
}

impl Chain {
    pub fn new(genesis: Block, difficulty: DifficultyTarget) -> Self {
        Chain {
            blocks: vec![genesis],
            difficulty,
        }
    }

    pub fn from_blocks(blocks: Vec<Block>, difficulty: DifficultyTarget) -> Self {
        Chain { blocks, difficulty }
    }

    pub fn empty(difficulty: DifficultyTarget) -> Self {
        Chain {
            blocks: Vec::new(),
            difficulty,
        }
    }

    pub fn difficulty(&self) -> &DifficultyTarget {
        &self.difficulty
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Block at 1-based `height`.
    pub fn get(&self, height: usize) -> Option<&Block> {
        height.checked_sub(1).and_then(|i| self.blocks.get(i))
    }

    pub fn head(&self) -> Result<&Block, ChainError> {
        self.blocks.last().ok_or(ChainError::EmptyChain)
    }

    pub fn genesis(&self) -> Option<&Block> {
        self.blocks.first()
    }

    pub fn push(&mut self, block: Block) {
        self.blocks.push(block);
    }

    /// Replaces the block at `height`, returning the previous one.
    pub fn replace(&mut self, height: usize, block: Block) -> Result<Block, ChainError> {
        let slot = height
            .checked_sub(1)
            .and_then(|i| self.blocks.get_mut(i))
            .ok_or(ChainError::NoSuchHeight(height))?;
        Ok(std::mem::replace(slot, block))
    }

    /// Removes the `q` rightmost blocks.
    pub fn prune_right(&self, q: usize) -> Chain {
        let keep = self.blocks.len().saturating_sub(q);
        Chain {
            blocks: self.blocks[..keep].to_vec(),
            difficulty: self.difficulty,
        }
    }

    /// Removes the `q` leftmost blocks.
    pub fn prune_left(&self, q: usize) -> Chain {
        let skip = q.min(self.blocks.len());
        Chain {
            blocks: self.blocks[skip..].to_vec(),
            difficulty: self.difficulty,
        }
    }

    /// True iff `self` is an initial segment of `other`.
    pub fn is_prefix_of(&self, other: &Chain) -> bool {
        self.blocks.len() <= other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a == b)
    }

    /// All entries currently present in the chain.
    pub fn entries(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.blocks.iter().flat_map(|b| b.payload.entries.iter())
    }
}

pub fn head_of(c: &Chain) -> Result<&Block, ChainError> {
    c.head()
}

pub fn is_prefix(c1: &Chain, c2: &Chain) -> bool {
    c1.is_prefix_of(c2)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MineOutcome {
    Found { block: Block, attempts: u64 },
    NotFound { attempts: u64 },
}

impl MineOutcome {
    pub fn block(self) -> Option<Block> {
        match self {
            MineOutcome::Found { block, .. } => Some(block),
            MineOutcome::NotFound { .. } => None,
        }
    }

    pub fn attempts(&self) -> u64 {
        match self {
            MineOutcome::Found { attempts, .. } | MineOutcome::NotFound { attempts } => *attempts,
        }
    }
}

/// Tries up to `max_attempts` counters for a block extending `parent`.
///
/// The counter sequence starts at a value drawn from `seed`, so distinct
/// seeds explore disjoint-looking ranges while remaining reproducible.
pub fn mine_block(
    parent: &Block,
    payload: BlockPayload,
    target: &DifficultyTarget,
    max_attempts: u64,
    seed: u64,
) -> MineOutcome {
    assert!(max_attempts >= 1, "max_attempts must be at least 1");
    let s = parent.link_digest();
    let g = data_digest(&s, &payload);
    let y = OldState::single(g);
    let y_bytes = y.to_bytes();
    let start: u64 = ChaCha8Rng::seed_from_u64(seed).gen();
    for attempt in 0..max_attempts {
        let ctr = start.wrapping_add(attempt);
        let pow = hash_h(&[&ctr.to_le_bytes(), g.as_ref(), &y_bytes]);
        if meets_target(&pow, target) {
            return MineOutcome::Found {
                block: Block { s, payload, ctr, y },
                attempts: attempt + 1,
            };
        }
    }
    MineOutcome::NotFound {
        attempts: max_attempts,
    }
}

/// An honest chain of `len` blocks (genesis included) with up to
/// `max_entries` random entries per block, mined at `target`.
pub fn random_chain(len: usize, max_entries: usize, target: &DifficultyTarget, seed: u64) -> Chain {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Chain::new(default_genesis(), *target);
    while c.len() < len {
        let n = rng.gen_range(0..=max_entries);
        let entries: Vec<Vec<u8>> = (0..n)
            .map(|_| (0..rng.gen_range(0..48)).map(|_| rng.gen()).collect())
            .collect();
        let parent = c.head().expect("genesis");
        if let Some(b) = mine_block(parent, BlockPayload::new(entries, Vec::new()), target, u64::MAX, rng.gen()).block() {
            c.push(b);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_of(n: usize) -> Chain {
        let mut c = Chain::new(default_genesis(), DifficultyTarget::MAX);
        for i in 1..n {
            let parent = c.head().unwrap().clone();
            let payload = BlockPayload::from_entries([format!("b{i}").into_bytes()]);
            let b = mine_block(&parent, payload, &DifficultyTarget::MAX, 4, i as u64)
                .block()
                .unwrap();
            c.push(b);
        }
        c
    }

    #[test]
    fn head_of_chains() {
        let c = chain_of(1);
        assert_eq!(c.head().unwrap(), &default_genesis());
        let c = chain_of(6);
        assert_eq!(c.head().unwrap(), c.get(6).unwrap());
        let e = Chain::empty(DifficultyTarget::MAX);
        assert_eq!(e.head(), Err(ChainError::EmptyChain));
    }

    #[test]
    fn prune_operators() {
        let c = chain_of(5);
        let r = c.prune_right(2);
        assert_eq!(r.len(), 3);
        assert!(r.is_prefix_of(&c));
        assert!(c.prune_right(5).is_empty());
        assert!(c.prune_right(9).is_empty());
        assert_eq!(c.prune_right(0), c);

        let l = c.prune_left(2);
        assert_eq!(l.blocks(), &c.blocks()[2..]);
        assert!(c.prune_left(5).is_empty());
        assert_eq!(c.prune_left(0), c);
    }

    #[test]
    fn prefix_relation() {
        let c = chain_of(4);
        assert!(c.is_prefix_of(&c));
        assert!(c.prune_right(1).is_prefix_of(&c));
        assert!(!c.is_prefix_of(&c.prune_right(1)));
        let mut other = c.clone();
        let mut b2 = other.get(2).unwrap().clone();
        b2.payload.entries.push(b"x".to_vec());
        other.replace(2, b2).unwrap();
        assert!(!other.is_prefix_of(&c));
        assert!(!c.is_prefix_of(&other));
    }

    #[test]
    fn mining_trivial_and_impossible_targets() {
        let g = default_genesis();
        let out = mine_block(&g, BlockPayload::default(), &DifficultyTarget::MAX, 1, 7);
        let MineOutcome::Found { block, attempts } = out else {
            panic!("max target must succeed")
        };
        assert_eq!(attempts, 1);
        assert_eq!(block.s, g.link_digest());
        assert_eq!(block.y, OldState::single(block.data_digest()));
        assert!(block.is_unredacted());

        let out = mine_block(&g, BlockPayload::default(), &DifficultyTarget::one(), 10, 7);
        assert_eq!(out, MineOutcome::NotFound { attempts: 10 });
    }

    #[test]
    fn link_algebra_for_unredacted_blocks() {
        let c = chain_of(3);
        for b in c.blocks() {
            assert_eq!(b.link_digest(), b.old_link_digest());
            assert_eq!(b.link_digest(), b.old_link_digest_full());
        }
    }

    #[test]
    fn mining_is_seed_deterministic() {
        let g = default_genesis();
        let t = DifficultyTarget::pow2(250);
        let a = mine_block(&g, BlockPayload::default(), &t, 10_000, 3);
        let b = mine_block(&g, BlockPayload::default(), &t, 10_000, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn payload_encoding_separates_entries_and_votes() {
        let d = Digest([7; 32]);
        let a = BlockPayload::new(vec![d.0.to_vec()], vec![]);
        let b = BlockPayload::new(vec![], vec![d]);
        assert_ne!(a.canonical_bytes(), b.canonical_bytes());
    }
}
