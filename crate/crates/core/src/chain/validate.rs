//! Block and chain validation for both redaction modes, plus the immutable
//! reference validator.

use std::cell::OnceCell;
use std::fmt;

use thiserror::Error;

use super::{Block, BlockPayload, Chain, Mode};
use crate::hashcore::{hash_h, meets_target, Digest, DifficultyTarget};
use crate::redaction::{PolicyEvaluator, PolicyVerdict, VoteIndex};

/// Application-level checks on block data. The generic core only checks
/// structure; the ledger plugs in transaction rules.
pub trait PayloadRules: Sync {
    fn validate_payload(&self, payload: &BlockPayload) -> bool;
}

/// Structural rules: a payload may not carry the same vote twice.
#[derive(Debug, Clone, Copy, Default)]
pub struct Structural;

impl PayloadRules for Structural {
    fn validate_payload(&self, payload: &BlockPayload) -> bool {
        !payload.has_duplicate_votes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    EmptyChain,
    GenesisMalformed,
    GenesisMismatch,
    PayloadInvalid,
    ModeViolation,
    PowFailed,
    BrokenLink,
    /// The block at this height is redacted but the candidate checks fail.
    CandidateInvalid,
    /// The block at this height is redacted without an accepted vote.
    UnapprovedRedaction(PolicyVerdict),
    HeadRedacted,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ChainFault {
    /// 1-based height of the offending block; 0 for an empty chain.
    pub height: usize,
    pub kind: FaultKind,
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match &self.kind {
            FaultKind::EmptyChain => "chain is empty".to_string(),
            FaultKind::GenesisMalformed => "genesis block is malformed".to_string(),
            FaultKind::GenesisMismatch => "genesis block does not match the pinned digest".to_string(),
            FaultKind::PayloadInvalid => "payload rejected".to_string(),
            FaultKind::ModeViolation => "old state has more than one segment in single mode".to_string(),
            FaultKind::PowFailed => "proof of work fails both disjuncts".to_string(),
            FaultKind::BrokenLink => "link to predecessor does not hold".to_string(),
            FaultKind::CandidateInvalid => "redacted block fails candidate validation".to_string(),
            FaultKind::UnapprovedRedaction(v) => format!("redaction not approved (policy: {v})"),
            FaultKind::HeadRedacted => "head block carries redacted data".to_string(),
        };
        write!(f, "height {}: {}", self.height, what)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("single-mode block has {0} old-state segments")]
pub struct ModeViolation(pub usize);

/// Validation context: mode, policy, payload rules and an optional pinned
/// genesis digest.
#[derive(Clone, Copy)]
pub struct Validator<'a> {
    pub mode: Mode,
    pub policy: &'a dyn PolicyEvaluator,
    pub rules: &'a dyn PayloadRules,
    pub genesis: Option<Digest>,
}

impl<'a> Validator<'a> {
    pub fn new(mode: Mode, policy: &'a dyn PolicyEvaluator, rules: &'a dyn PayloadRules) -> Self {
        Validator {
            mode,
            policy,
            rules,
            genesis: None,
        }
    }

    pub fn with_genesis(mut self, digest: Digest) -> Self {
        self.genesis = Some(digest);
        self
    }

    /// `H(ctr, y, y)` as the mode reads it.
    pub fn old_link(&self, b: &Block) -> Digest {
        match self.mode {
            Mode::Single => b.old_link_digest_full(),
            Mode::Ext => b.old_link_digest(),
        }
    }

    /// Block validity given its precomputed `G(s, x)`.
    pub fn check_block(&self, b: &Block, g: &Digest, d: &DifficultyTarget) -> Result<(), FaultKind> {
        if self.mode == Mode::Single && b.y.len() != 1 {
            return Err(FaultKind::ModeViolation);
        }
        if !self.rules.validate_payload(&b.payload) {
            return Err(FaultKind::PayloadInvalid);
        }
        if pow_holds(b, g, d) {
            Ok(())
        } else {
            Err(FaultKind::PowFailed)
        }
    }

    /// Candidate validity for a block standing in at height `j` of `c`.
    ///
    /// Checks the block itself, both old links, and in extension mode that
    /// every earlier redaction recorded in `y` was approved on `c`.
    pub fn check_candidate(
        &self,
        c: &Chain,
        j: usize,
        block: &Block,
        votes: &VoteIndex,
    ) -> Result<(), FaultKind> {
        let n = c.len();
        if j < 2 || j + 1 > n {
            return Err(FaultKind::CandidateInvalid);
        }
        self.check_block(block, &block.data_digest(), c.difficulty())?;
        let prev = c.get(j - 1).expect("j >= 2");
        let next = c.get(j + 1).expect("j < n");
        if block.s != self.old_link(prev) || next.s != self.old_link(block) {
            return Err(FaultKind::CandidateInvalid);
        }
        if self.mode == Mode::Ext {
            for token in historical_tokens(block) {
                let verdict = self.policy.evaluate(c, votes, &token);
                if verdict != PolicyVerdict::Accept {
                    return Err(FaultKind::UnapprovedRedaction(verdict));
                }
            }
        }
        Ok(())
    }

    pub fn check_chain(&self, c: &Chain) -> Result<(), ChainFault> {
        let fault = |height, kind| ChainFault { height, kind };
        let blocks = c.blocks();
        let n = blocks.len();
        if n == 0 {
            return Err(fault(0, FaultKind::EmptyChain));
        }
        let gs: Vec<Digest> = blocks.iter().map(Block::data_digest).collect();

        let genesis = &blocks[0];
        if genesis.s != Digest::ZERO
            || genesis.ctr != 0
            || genesis.y.len() != 1
            || *genesis.y.original() != gs[0]
            || !self.rules.validate_payload(&genesis.payload)
        {
            return Err(fault(1, FaultKind::GenesisMalformed));
        }
        if let Some(pinned) = self.genesis {
            if genesis.link_digest_with(&gs[0]) != pinned {
                return Err(fault(1, FaultKind::GenesisMismatch));
            }
        }
        let head = &blocks[n - 1];
        if head.y.len() != 1 || *head.y.original() != gs[n - 1] {
            return Err(fault(n, FaultKind::HeadRedacted));
        }

        let votes: OnceCell<VoteIndex> = OnceCell::new();
        for j in (2..=n).rev() {
            let b = &blocks[j - 1];
            let prev = &blocks[j - 2];
            self.check_block(b, &gs[j - 1], c.difficulty())
                .map_err(|k| fault(j, k))?;
            if b.s == prev.link_digest_with(&gs[j - 2]) {
                continue;
            }
            if j - 1 < 2 || b.s != self.old_link(prev) {
                return Err(fault(j, FaultKind::BrokenLink));
            }
            let votes = votes.get_or_init(|| VoteIndex::build(c));
            self.check_candidate(c, j - 1, prev, votes)
                .map_err(|k| fault(j - 1, k))?;
            let token = prev.link_digest_with(&gs[j - 2]);
            let verdict = self.policy.evaluate(c, votes, &token);
            if verdict != PolicyVerdict::Accept {
                return Err(fault(j - 1, FaultKind::UnapprovedRedaction(verdict)));
            }
        }
        Ok(())
    }

    pub fn validate_chain(&self, c: &Chain) -> bool {
        self.check_chain(c).is_ok()
    }
}

fn pow_holds(b: &Block, g: &Digest, d: &DifficultyTarget) -> bool {
    let ctr = b.ctr.to_le_bytes();
    let first = hash_h(&[&ctr, g.as_ref(), &b.y.to_bytes()]);
    if meets_target(&first, d) {
        return true;
    }
    let y1 = b.y.original();
    let second = hash_h(&[&ctr, y1.as_ref(), y1.as_ref()]);
    meets_target(&second, d)
}

/// Vote tokens of the redactions recorded in `b.y`, oldest first:
/// `H(ctr, y^(i), y^(1) || ... || y^(i-1))` for `i` in `2..=l`.
pub(crate) fn historical_tokens(b: &Block) -> Vec<Digest> {
    let ctr = b.ctr.to_le_bytes();
    let segs = b.y.segments();
    (1..segs.len())
        .map(|i| hash_h(&[&ctr, segs[i].as_ref(), &b.y.prefix_bytes(i)]))
        .collect()
}

/// Single-mode block validity. Payload check is structural.
pub fn validate_block(b: &Block, d: &DifficultyTarget) -> Result<bool, ModeViolation> {
    if b.y.len() != 1 {
        return Err(ModeViolation(b.y.len()));
    }
    Ok(Structural.validate_payload(&b.payload) && pow_holds(b, &b.data_digest(), d))
}

/// Extension-mode block validity; any segment count is accepted.
pub fn validate_block_ext(b: &Block, d: &DifficultyTarget) -> bool {
    Structural.validate_payload(&b.payload) && pow_holds(b, &b.data_digest(), d)
}

pub fn validate_chain(c: &Chain, policy: &dyn PolicyEvaluator) -> bool {
    Validator::new(Mode::Single, policy, &Structural).validate_chain(c)
}

pub fn validate_chain_ext(c: &Chain, policy: &dyn PolicyEvaluator) -> bool {
    Validator::new(Mode::Ext, policy, &Structural).validate_chain(c)
}

/// Reference validator for a chain that never allows edits: first PoW
/// disjunct only and every link must be the full state hash.
pub fn validate_chain_immutable(c: &Chain, rules: &dyn PayloadRules) -> bool {
    let blocks = c.blocks();
    let Some(genesis) = blocks.first() else {
        return false;
    };
    if genesis.s != Digest::ZERO
        || genesis.ctr != 0
        || genesis.y.len() != 1
        || !genesis.is_unredacted()
        || !rules.validate_payload(&genesis.payload)
    {
        return false;
    }
    let mut prev_link = genesis.link_digest();
    for b in &blocks[1..] {
        if b.s != prev_link || b.y.len() != 1 || !rules.validate_payload(&b.payload) {
            return false;
        }
        let g = b.data_digest();
        let link = b.link_digest_with(&g);
        if !meets_target(&link, c.difficulty()) {
            return false;
        }
        prev_link = link;
    }
    true
}
