//! Incremental construction of ledger chains by an honest miner: edits are
//! voted on through the window and applied once accepted.

use std::collections::{BTreeMap, HashMap};

use ed25519_dalek::SigningKey;
use thiserror::Error;

use super::block::{coinbase, ledger_genesis, mine_ledger_block, LedgerBlock, LedgerChain, TxList, SUBSIDY};
use super::edit::{edit_pair, validate_candidate_tx, vote_token};
use super::tx::{OutPoint, OutputKind, Transaction, TxOutput};
use super::validate::LedgerParams;
use crate::hashcore::{hash_h, Digest, DifficultyTarget};
use crate::redaction::PolicyVerdict;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("transaction spends an unknown output")]
    UnknownInput,
    #[error("transaction spends more than its inputs")]
    Overspend,
    #[error("candidate is not a consistent redaction of a transaction in the chain")]
    BadCandidate,
}

#[derive(Debug, Clone)]
struct Pending {
    old: Transaction,
    cand: Transaction,
    edit_height: Option<usize>,
    applied: bool,
}

/// Builds a valid ledger chain block by block.
pub struct LedgerBuilder {
    chain: LedgerChain,
    params: LedgerParams,
    miner: SigningKey,
    seed: u64,
    amounts: HashMap<OutPoint, u64>,
    locations: HashMap<Digest, usize>,
    pending: BTreeMap<(Digest, Digest), Pending>,
    votes: HashMap<Digest, Vec<usize>>,
    /// Whether the miner votes for registered edits.
    pub voting: bool,
}

impl LedgerBuilder {
    /// Starts a chain whose genesis coinbase pays `outputs`.
    pub fn new(outputs: Vec<TxOutput>, difficulty: DifficultyTarget, params: LedgerParams, seed: u64) -> Self {
        let miner = super::tx::signing_key(seed ^ 0x6d69_6e65);
        let mut cb = coinbase(1, &miner.verifying_key(), 0, &[]);
        cb.outputs = outputs;
        let genesis = ledger_genesis(cb, difficulty);
        let mut b = LedgerBuilder {
            chain: LedgerChain {
                blocks: Vec::new(),
                difficulty,
            },
            params,
            miner,
            seed,
            amounts: HashMap::new(),
            locations: HashMap::new(),
            pending: BTreeMap::new(),
            votes: HashMap::new(),
            voting: true,
        };
        b.index_block(&genesis, 1);
        b.chain.blocks.push(genesis);
        b
    }

    pub fn chain(&self) -> &LedgerChain {
        &self.chain
    }

    pub fn into_chain(self) -> LedgerChain {
        self.chain
    }

    pub fn params(&self) -> &LedgerParams {
        &self.params
    }

    pub fn height(&self) -> usize {
        self.chain.len()
    }

    pub fn genesis_txid(&self) -> Digest {
        self.chain.blocks[0].txs.slots[0].tx.txid()
    }

    /// Height of the block holding `txid` (original id for redacted slots).
    pub fn location(&self, txid: &Digest) -> Option<usize> {
        self.locations.get(txid).copied()
    }

    pub fn amount(&self, op: &OutPoint) -> Option<u64> {
        self.amounts.get(op).copied()
    }

    fn index_block(&mut self, block: &LedgerBlock, height: usize) {
        for slot in &block.txs.slots {
            let id = slot.tx.txid();
            let key = slot.original_txid(&id);
            self.locations.insert(key, height);
            for (i, o) in slot.tx.outputs.iter().enumerate() {
                if o.kind == OutputKind::Spendable {
                    self.amounts.insert(OutPoint { txid: key, index: i as u32 }, o.amount);
                }
            }
            if let Some(pair) = edit_pair(&slot.tx) {
                if let Some(p) = self.pending.get_mut(&pair) {
                    p.edit_height.get_or_insert(height);
                }
            }
        }
        if let Some(cb) = block.txs.slots.first() {
            for o in cb.tx.data_outputs() {
                if let Ok(raw) = <[u8; 32]>::try_from(o.script.as_slice()) {
                    self.votes.entry(Digest(raw)).or_default().push(height);
                }
            }
        }
    }

    fn fee(&self, tx: &Transaction) -> Result<u64, BuildError> {
        let mut inflow = 0u64;
        for i in &tx.inputs {
            inflow += self.amounts.get(&i.outpoint()).ok_or(BuildError::UnknownInput)?;
        }
        let out = tx.output_total().ok_or(BuildError::Overspend)?;
        inflow.checked_sub(out).ok_or(BuildError::Overspend)
    }

    /// Makes `cand` known as the replacement for `old`. The miner votes for
    /// it once a matching edit transaction is on chain.
    pub fn register_candidate(&mut self, old: Transaction, cand: Transaction) -> Result<(), BuildError> {
        if !validate_candidate_tx(&old, &cand) || !self.locations.contains_key(&old.txid()) {
            return Err(BuildError::BadCandidate);
        }
        let pair = (old.txid(), cand.txid());
        let edit_height = self
            .chain
            .blocks
            .iter()
            .enumerate()
            .find(|(_, b)| b.txs.slots.iter().any(|s| edit_pair(&s.tx) == Some(pair)))
            .map(|(i, _)| i + 1);
        self.pending.insert(
            pair,
            Pending {
                old,
                cand,
                edit_height,
                applied: false,
            },
        );
        Ok(())
    }

    fn verdict(&self, e: usize, token: &Digest) -> PolicyVerdict {
        let hs = self.votes.get(token).map(Vec::as_slice).unwrap_or(&[]);
        self.params.verdict(e, self.chain.len(), hs)
    }

    /// Applies every registered edit that is accepted on the current chain.
    /// Returns how many were applied.
    pub fn apply_due(&mut self) -> usize {
        let due: Vec<(Digest, Digest)> = self
            .pending
            .iter()
            .filter(|(_, p)| !p.applied)
            .filter_map(|(pair, p)| {
                let e = p.edit_height?;
                (self.verdict(e, &vote_token(&pair.0, &pair.1)) == PolicyVerdict::Accept).then_some(*pair)
            })
            .collect();
        for pair in &due {
            let p = self.pending.get_mut(pair).expect("listed above");
            let h = self.locations[&pair.0];
            self.chain.redact(h, &p.old, &p.cand).expect("candidate checked at registration");
            p.applied = true;
        }
        due.len()
    }

    /// Vote tokens the honest miner puts in the block at `height`.
    pub fn votes_for(&self, height: usize) -> Vec<Digest> {
        if !self.voting {
            return Vec::new();
        }
        self.pending
            .iter()
            .filter_map(|(pair, p)| {
                let (start, end) = self.params.window(p.edit_height?);
                (start..=end).contains(&height).then(|| vote_token(&pair.0, &pair.1))
            })
            .collect()
    }

    /// Honest step: apply accepted edits, vote, and mine `txs`.
    pub fn mine(&mut self, txs: Vec<Transaction>) -> Result<&LedgerBlock, BuildError> {
        self.apply_due();
        let votes = self.votes_for(self.chain.len() + 1);
        self.mine_with_votes(txs, &votes)
    }

    /// Mines `txs` with exactly `votes` in the coinbase; applies nothing.
    pub fn mine_with_votes(&mut self, txs: Vec<Transaction>, votes: &[Digest]) -> Result<&LedgerBlock, BuildError> {
        let height = self.chain.len() + 1;
        let mut fees = 0u64;
        for tx in &txs {
            fees += self.fee(tx)?;
        }
        let cb = coinbase(height, &self.miner.verifying_key(), SUBSIDY + fees, votes);
        let mut all = Vec::with_capacity(txs.len() + 1);
        all.push(cb);
        all.extend(txs);
        let prev_id = self.chain.head().expect("genesis exists").header.id();
        let seed = u64::from_le_bytes(
            hash_h(&[&self.seed.to_le_bytes(), &(height as u64).to_le_bytes()]).0[..8]
                .try_into()
                .expect("8 bytes"),
        );
        let block = mine_ledger_block(
            prev_id,
            TxList::from_txs(all),
            self.chain.difficulty,
            height as u64,
            u64::MAX,
            seed,
        )
        .expect("unbounded search");
        self.index_block(&block, height);
        self.chain.blocks.push(block);
        Ok(self.chain.head().expect("just pushed"))
    }
}
