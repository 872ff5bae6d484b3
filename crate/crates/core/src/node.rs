//! Per-party round state machine: chain update, candidate pool, chain
//! editing, and block creation with votes.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{mine_block, Block, BlockPayload, Chain, MineOutcome, Mode, PayloadRules, Structural, Validator};
use crate::hashcore::Digest;
use crate::ledger::{endorse_ledger_edit, ledger_edit_admitted, LedgerRules};
use crate::redaction::{
    apply_redaction_indexed, propose_edit, CandidateBlock, CandidatePool, CandidateWire, PolicyEvaluator,
    PolicyParams, PolicyVerdict, ProposeError, VoteIndex,
};

static STRUCTURAL: Structural = Structural;
static LEDGER: LedgerRules = LedgerRules;

/// How many rounds a candidate that cannot be rebuilt yet is retried.
pub const CANDIDATE_RETRY_ROUNDS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Honest,
    Corrupted,
}

/// Which payload rules a node enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataRules {
    #[default]
    Structural,
    Ledger,
}

impl DataRules {
    pub fn rules(&self) -> &'static dyn PayloadRules {
        match self {
            DataRules::Structural => &STRUCTURAL,
            DataRules::Ledger => &LEDGER,
        }
    }
}

/// Decides which candidates a node votes for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EndorsementRule {
    /// Full scrutiny: the edit must only remove data.
    Honest,
    Never,
    /// Vote only for these candidate digests.
    Only(BTreeSet<Digest>),
}

impl EndorsementRule {
    pub fn endorses(&self, data: DataRules, original: &Block, cand: &CandidateBlock) -> bool {
        match self {
            EndorsementRule::Never => false,
            EndorsementRule::Only(set) => set.contains(&cand.digest()),
            EndorsementRule::Honest => match data {
                DataRules::Structural => removes_entries_only(&original.payload, &cand.block.payload),
                DataRules::Ledger => endorse_ledger_edit(&original.payload, &cand.block.payload),
            },
        }
    }
}

/// True iff `cand` keeps the votes and drops at least one entry while
/// keeping the others in order.
pub fn removes_entries_only(original: &BlockPayload, cand: &BlockPayload) -> bool {
    if original.votes != cand.votes || cand.entries.len() >= original.entries.len() {
        return false;
    }
    let mut it = original.entries.iter();
    cand.entries.iter().all(|e| it.any(|o| o == e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Chain(Arc<Chain>),
    Candidate(CandidateWire),
    Entry(Vec<u8>),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Chain(_) => "chain",
            Message::Candidate(_) => "candidate",
            Message::Entry(_) => "entry",
        }
    }

    /// Content digest used to audit that delivery does not alter messages.
    pub fn digest(&self) -> Digest {
        use crate::hashcore::hash_h;
        match self {
            Message::Chain(c) => {
                let mut acc = Digest::ZERO;
                for b in c.blocks() {
                    acc = hash_h(&[acc.as_ref(), b.version_digest().as_ref()]);
                }
                acc
            }
            Message::Candidate(w) => hash_h(&[
                &(w.target_index as u64).to_le_bytes(),
                w.payload_entries_hex.join(",").as_bytes(),
                w.declared_digest_hex.as_bytes(),
            ]),
            Message::Entry(e) => hash_h(&[b"entry", e]),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundInput {
    pub messages: Vec<Message>,
    pub environment: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum NodeEvent {
    Adopted { len: usize },
    Pooled { digest: Digest, target: usize },
    Applied { digest: Digest, target: usize },
    Dropped { digest: Digest, verdict: PolicyVerdict },
    Mined { height: usize, votes: usize, entries: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundOutput {
    pub outbound: Vec<Message>,
    pub events: Vec<NodeEvent>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NodeError {
    #[error(transparent)]
    Propose(#[from] ProposeError),
    #[error("candidate fails validation against the local chain")]
    CandidateInvalid,
    #[error("no stable edit transaction for this candidate")]
    NotAdmitted,
}

/// Static parameters shared by every node of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeConfig {
    pub mode: Mode,
    pub params: PolicyParams,
    pub data: DataRules,
    pub genesis: Block,
    pub difficulty: crate::hashcore::DifficultyTarget,
    pub max_entries_per_block: usize,
}

impl NodeConfig {
    pub fn validator(&self) -> Validator<'_> {
        Validator::new(self.mode, &self.params, self.data.rules()).with_genesis(self.genesis.link_digest())
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: usize,
    pub chain: Arc<Chain>,
    pub pool: CandidatePool,
    pub endorsement: EndorsementRule,
    pub miner_seed: u64,
    pub role: Role,
    config: Arc<NodeConfig>,
    received: Vec<Vec<u8>>,
    received_set: HashSet<Vec<u8>>,
    redacted_away: HashSet<Vec<u8>>,
    deferred: Vec<(CandidateWire, u64)>,
    round: u64,
}

impl NodeState {
    pub fn new(id: usize, config: Arc<NodeConfig>, miner_seed: u64) -> Self {
        let chain = Arc::new(Chain::new(config.genesis.clone(), config.difficulty));
        NodeState {
            id,
            chain,
            pool: CandidatePool::new(),
            endorsement: EndorsementRule::Honest,
            miner_seed,
            role: Role::Honest,
            config,
            received: Vec::new(),
            received_set: HashSet::new(),
            redacted_away: HashSet::new(),
            deferred: Vec::new(),
            round: 0,
        }
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    pub fn params(&self) -> &PolicyParams {
        &self.config.params
    }

    pub fn validator(&self) -> Validator<'_> {
        self.config.validator()
    }

    pub fn has_entry(&self, e: &[u8]) -> bool {
        self.received_set.contains(e)
    }

    fn receive_entry(&mut self, e: Vec<u8>) {
        if self.received_set.insert(e.clone()) {
            self.received.push(e);
        }
    }

    /// Steps 1 and 2: adopt the longest valid strictly-longer chain.
    fn update_chain(&mut self, chains: &[Arc<Chain>], events: &mut Vec<NodeEvent>) {
        let mut offers: Vec<&Arc<Chain>> = chains.iter().filter(|c| c.len() > self.chain.len()).collect();
        // Longest first; the stable sort keeps delivery order among equals.
        offers.sort_by_key(|c| std::cmp::Reverse(c.len()));
        let mut tried: HashSet<*const Chain> = HashSet::new();
        for c in offers {
            if !tried.insert(Arc::as_ptr(c)) {
                continue;
            }
            if self.validator().validate_chain(c) {
                self.chain = Arc::clone(c);
                events.push(NodeEvent::Adopted { len: c.len() });
                return;
            }
        }
    }

    fn admit(&self, cand: &CandidateBlock) -> bool {
        match self.config.data {
            DataRules::Structural => true,
            DataRules::Ledger => ledger_edit_admitted(&self.chain, cand, self.config.params.k),
        }
    }

    fn take_candidate(&mut self, wire: CandidateWire, votes: &VoteIndex, events: &mut Vec<NodeEvent>) -> bool {
        let Ok(cand) = wire.to_candidate(&self.chain, self.config.mode) else {
            return false;
        };
        if !self.admit(&cand) {
            return false;
        }
        let digest = cand.digest();
        let target = cand.target_index;
        if self.pool.contains(&digest) {
            return true;
        }
        let config = Arc::clone(&self.config);
        let validator = config.validator();
        let inserted = self.pool.upsert(&self.chain, cand, &validator, votes);
        if inserted {
            events.push(NodeEvent::Pooled { digest, target });
        }
        inserted
    }

    fn edit_chain(&mut self, events: &mut Vec<NodeEvent>) {
        let votes = VoteIndex::build(&self.chain);
        let config = Arc::clone(&self.config);
        let validator = config.validator();
        // Record rejections before the sweep removes them.
        for (digest, _) in self.pool.iter() {
            let v = self.config.params.evaluate(&self.chain, &votes, digest);
            if v == PolicyVerdict::Reject {
                events.push(NodeEvent::Dropped { digest: *digest, verdict: v });
            }
        }
        let accepted = self.pool.sweep(&self.chain, &validator, &votes);
        for cand in accepted {
            let Ok(edited) = apply_redaction_indexed(&self.chain, &cand, &validator, &votes) else {
                continue;
            };
            let original = self.chain.get(cand.target_index).expect("validated").payload.clone();
            for e in &original.entries {
                if !cand.block.payload.entries.contains(e) {
                    self.redacted_away.insert(e.clone());
                }
            }
            self.chain = Arc::new(edited);
            events.push(NodeEvent::Applied {
                digest: cand.digest(),
                target: cand.target_index,
            });
        }
    }

    /// Entries received but neither on chain nor redacted away, oldest first.
    pub fn pending_entries(&self) -> Vec<Vec<u8>> {
        let on_chain: HashSet<&Vec<u8>> = self.chain.entries().collect();
        self.received
            .iter()
            .filter(|e| !on_chain.contains(e) && !self.redacted_away.contains(*e))
            .take(self.config.max_entries_per_block)
            .cloned()
            .collect()
    }

    /// Vote tokens for endorsed candidates whose window is still open at
    /// the next height.
    pub fn votes_to_cast(&self) -> Vec<Digest> {
        let next = self.chain.len() + 1;
        let votes = VoteIndex::build(&self.chain);
        let ell = self.config.params.ell;
        let mut out: Vec<Digest> = self
            .pool
            .iter()
            .filter(|(d, _)| votes.first(d).is_none_or(|r| next < r + ell))
            .filter(|(_, cand)| {
                self.chain
                    .get(cand.target_index)
                    .is_some_and(|orig| self.endorsement.endorses(self.config.data, orig, cand))
            })
            .map(|(d, _)| *d)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// One round: chain update, pool update, editing, then mining with `q`
    /// attempts seeded by `seed`.
    pub fn step_round(&mut self, input: RoundInput, q: u64, seed: u64) -> RoundOutput {
        self.round += 1;
        let mut events = Vec::new();
        let mut chains = Vec::new();
        let mut wires = Vec::new();
        for m in input.messages {
            match m {
                Message::Chain(c) => chains.push(c),
                Message::Candidate(w) => wires.push(w),
                Message::Entry(e) => self.receive_entry(e),
            }
        }
        for e in input.environment {
            self.receive_entry(e);
        }
        self.update_chain(&chains, &mut events);

        let votes = VoteIndex::build(&self.chain);
        let mut retry = std::mem::take(&mut self.deferred);
        retry.extend(wires.into_iter().map(|w| (w, self.round + CANDIDATE_RETRY_ROUNDS)));
        for (w, expires) in retry {
            if !self.take_candidate(w.clone(), &votes, &mut events) && self.round < expires {
                self.deferred.push((w, expires));
            }
        }

        self.edit_chain(&mut events);

        let mut outbound = Vec::new();
        if q > 0 {
            if let Some((block, mined)) = self.try_mine(q, seed) {
                let mut next = (*self.chain).clone();
                next.push(block);
                if self.validator().validate_chain(&next) {
                    self.chain = Arc::new(next);
                    events.push(mined);
                    outbound.push(Message::Chain(Arc::clone(&self.chain)));
                }
            }
        }
        RoundOutput { outbound, events }
    }

    fn try_mine(&self, q: u64, seed: u64) -> Option<(Block, NodeEvent)> {
        let payload = BlockPayload::new(self.pending_entries(), self.votes_to_cast());
        let mined = NodeEvent::Mined {
            height: self.chain.len() + 1,
            votes: payload.votes.len(),
            entries: payload.entries.len(),
        };
        let head = self.chain.head().expect("chain holds genesis");
        match mine_block(head, payload, &self.config.difficulty, q, seed) {
            MineOutcome::Found { block, .. } => Some((block, mined)),
            MineOutcome::NotFound { .. } => None,
        }
    }

    /// Proposes replacing block `j`'s payload, pools the candidate and
    /// returns the broadcast message.
    pub fn submit_edit_proposal(&mut self, j: usize, payload: BlockPayload) -> Result<Message, NodeError> {
        let cand = propose_edit(&self.chain, j, payload, self.config.params.k, self.config.mode)?;
        self.submit_candidate(cand)
    }

    /// Pools an already built candidate and returns the broadcast message.
    pub fn submit_candidate(&mut self, cand: CandidateBlock) -> Result<Message, NodeError> {
        if !self.admit(&cand) {
            return Err(NodeError::NotAdmitted);
        }
        let wire = CandidateWire::from_candidate(&cand);
        let votes = VoteIndex::build(&self.chain);
        let config = Arc::clone(&self.config);
        let validator = config.validator();
        let digest = cand.digest();
        if !self.pool.contains(&digest) && !self.pool.upsert(&self.chain, cand, &validator, &votes) {
            return Err(NodeError::CandidateInvalid);
        }
        Ok(Message::Candidate(wire))
    }

    /// Replaces the node's state with a fresh one, keeping id and seed.
    pub fn reset(&mut self) {
        *self = NodeState::new(self.id, Arc::clone(&self.config), self.miner_seed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::default_genesis;
    use crate::hashcore::DifficultyTarget;
    use crate::redaction::Ratio;

    fn config(d: DifficultyTarget) -> Arc<NodeConfig> {
        Arc::new(NodeConfig {
            mode: Mode::Single,
            params: PolicyParams::new(2, 3, Ratio::new(2, 3).unwrap()).unwrap(),
            data: DataRules::Structural,
            genesis: default_genesis(),
            difficulty: d,
            max_entries_per_block: 8,
        })
    }

    fn entry_input(e: &str) -> RoundInput {
        RoundInput {
            messages: vec![],
            environment: vec![e.as_bytes().to_vec()],
        }
    }

    #[test]
    fn mining_at_max_target_extends_and_broadcasts() {
        let mut n = NodeState::new(0, config(DifficultyTarget::MAX), 1);
        let out = n.step_round(entry_input("a"), 1, 1);
        assert_eq!(n.chain.len(), 2);
        assert_eq!(out.outbound.len(), 1);
        assert_eq!(n.chain.get(2).unwrap().payload.entries, vec![b"a".to_vec()]);
        let out = n.step_round(RoundInput::default(), 1, 2);
        assert!(n.chain.get(3).unwrap().payload.entries.is_empty());
        assert_eq!(out.outbound.len(), 1);
    }

    #[test]
    fn longer_chain_adopted_equal_kept() {
        let cfg = config(DifficultyTarget::MAX);
        let mut a = NodeState::new(0, Arc::clone(&cfg), 1);
        let mut b = NodeState::new(1, Arc::clone(&cfg), 2);
        a.step_round(entry_input("x"), 1, 1);
        a.step_round(entry_input("y"), 1, 2);
        b.step_round(entry_input("z"), 1, 3);
        let a_chain = Arc::clone(&a.chain);
        let mut b_short = b.clone();
        b.step_round(RoundInput { messages: vec![Message::Chain(Arc::clone(&a_chain))], environment: vec![] }, 0, 0);
        assert_eq!(b.chain, a_chain);

        b_short.step_round(entry_input("w"), 1, 4);
        let before = Arc::clone(&b_short.chain);
        b_short.step_round(RoundInput { messages: vec![Message::Chain(a_chain)], environment: vec![] }, 0, 0);
        assert_eq!(b_short.chain, before);
    }

    #[test]
    fn invalid_delivered_candidate_leaves_pool_unchanged() {
        let mut n = NodeState::new(0, config(DifficultyTarget::MAX), 1);
        for r in 0..8 {
            n.step_round(entry_input(&format!("e{r}")), 1, r);
        }
        let mut wire = CandidateWire {
            target_index: 3,
            payload_entries_hex: vec![],
            declared_digest_hex: Digest::ZERO.to_hex(),
        };
        n.step_round(RoundInput { messages: vec![Message::Candidate(wire.clone())], environment: vec![] }, 0, 0);
        assert!(n.pool.is_empty());
        wire.target_index = 99;
        n.step_round(RoundInput { messages: vec![Message::Candidate(wire)], environment: vec![] }, 0, 0);
        assert!(n.pool.is_empty());
    }

    #[test]
    fn proposal_is_voted_and_applied() {
        let mut n = NodeState::new(0, config(DifficultyTarget::MAX), 1);
        for r in 0..6u64 {
            n.step_round(entry_input(&format!("e{r}")), 1, r);
        }
        assert!(matches!(
            n.submit_edit_proposal(6, BlockPayload::default()),
            Err(NodeError::Propose(ProposeError::TargetNotStable { .. }))
        ));
        let msg = n.submit_edit_proposal(3, BlockPayload::default()).unwrap();
        let Message::Candidate(wire) = msg else { panic!("candidate expected") };
        let digest = wire.declared_digest().unwrap();
        assert!(n.pool.contains(&digest));
        let mut applied = false;
        for r in 0..10u64 {
            let out = n.step_round(RoundInput::default(), 1, 100 + r);
            applied |= out.events.iter().any(|e| matches!(e, NodeEvent::Applied { target: 3, .. }));
            assert!(n.validator().validate_chain(&n.chain));
        }
        assert!(applied);
        assert!(n.chain.get(3).unwrap().payload.entries.is_empty());
        // The removed entry is not mined again.
        assert!(n.pending_entries().is_empty());
    }

    #[test]
    fn votes_are_deduplicated_and_honest_rule_checks_removal() {
        let orig = BlockPayload::from_entries([b"a".to_vec(), b"b".to_vec()]);
        assert!(removes_entries_only(&orig, &BlockPayload::from_entries([b"b".to_vec()])));
        assert!(!removes_entries_only(&orig, &orig));
        assert!(!removes_entries_only(&orig, &BlockPayload::from_entries([b"c".to_vec()])));
        assert!(!removes_entries_only(&orig, &BlockPayload::from_entries([b"b".to_vec(), b"a".to_vec()])));
    }

    #[test]
    fn round_determinism() {
        let cfg = config(DifficultyTarget::pow2(253));
        let run = || {
            let mut n = NodeState::new(0, Arc::clone(&cfg), 5);
            let mut outs = Vec::new();
            for r in 0..20u64 {
                outs.push(n.step_round(entry_input(&format!("t{r}")), 2, r * 7).events);
            }
            (n.chain, outs)
        };
        assert_eq!(run(), run());
    }
}
