//! Headers with an `old_merkle_root`, transaction lists with redacted slots,
//! and ledger chains.

use ed25519_dalek::VerifyingKey;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::edit::validate_candidate_tx;
use super::merkle::merkle_root;
use super::tx::{Transaction, TxInput, TxOutput};
use crate::hashcore::{hash_h, meets_target, Digest, DifficultyTarget};

/// Block reward before fees.
pub const SUBSIDY: u64 = 5_000_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockHeader {
    pub hash_prev: Digest,
    pub merkle_root: Digest,
    pub difficulty: DifficultyTarget,
    pub timestamp: u64,
    pub nonce: u64,
    pub old_merkle_root: Digest,
}

impl BlockHeader {
    fn hash_with(&self, root: &Digest) -> Digest {
        hash_h(&[
            self.hash_prev.as_ref(),
            root.as_ref(),
            &self.difficulty.to_be_bytes(),
            &self.timestamp.to_le_bytes(),
            &self.nonce.to_le_bytes(),
            self.old_merkle_root.as_ref(),
        ])
    }

    /// Identifier over the current fields.
    pub fn id(&self) -> Digest {
        self.hash_with(&self.merkle_root)
    }

    /// Identifier with `old_merkle_root` substituted for the merkle root:
    /// the id the block had when it was mined.
    pub fn original_id(&self) -> Digest {
        self.hash_with(&self.old_merkle_root)
    }

    pub fn is_redacted(&self) -> bool {
        self.merkle_root != self.old_merkle_root
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TxSlot {
    pub tx: Transaction,
    /// Id of the transaction this slot held before it was redacted.
    pub old_txid: Option<Digest>,
}

impl TxSlot {
    pub fn new(tx: Transaction) -> Self {
        TxSlot { tx, old_txid: None }
    }

    /// Merkle leaf given the current txid.
    pub fn leaf(&self, txid: &Digest) -> Digest {
        match &self.old_txid {
            Some(old) => hash_h(&[txid.as_ref(), old.as_ref()]),
            None => *txid,
        }
    }

    /// Id under which the slot's outputs and signatures live.
    pub fn original_txid(&self, txid: &Digest) -> Digest {
        self.old_txid.unwrap_or(*txid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TxList {
    pub slots: Vec<TxSlot>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RedactError {
    #[error("transaction not found in the block")]
    TxNotFound,
    #[error("candidate transaction is not a consistent redaction of the original")]
    CandidateMalformed,
}

impl TxList {
    pub fn from_txs(txs: Vec<Transaction>) -> Self {
        TxList {
            slots: txs.into_iter().map(TxSlot::new).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn txids(&self) -> Vec<Digest> {
        self.slots.iter().map(|s| s.tx.txid()).collect()
    }

    pub fn is_redacted(&self) -> bool {
        self.slots.iter().any(|s| s.old_txid.is_some())
    }

    /// Root over the current leaves; zero for an empty list.
    pub fn merkle_root_with(&self, txids: &[Digest]) -> Digest {
        let leaves: Vec<Digest> = self.slots.iter().zip(txids).map(|(s, id)| s.leaf(id)).collect();
        merkle_root(&leaves).unwrap_or(Digest::ZERO)
    }

    /// Root over the original transaction ids.
    pub fn old_merkle_root_with(&self, txids: &[Digest]) -> Digest {
        let leaves: Vec<Digest> = self
            .slots
            .iter()
            .zip(txids)
            .map(|(s, id)| s.original_txid(id))
            .collect();
        merkle_root(&leaves).unwrap_or(Digest::ZERO)
    }

    pub fn merkle_root(&self) -> Digest {
        self.merkle_root_with(&self.txids())
    }

    pub fn old_merkle_root(&self) -> Digest {
        self.old_merkle_root_with(&self.txids())
    }
}

/// Replaces `old` with `cand`, remembering the original id, and returns the
/// new list and its merkle root.
pub fn apply_tx_redaction(
    list: &TxList,
    old: &Transaction,
    cand: &Transaction,
) -> Result<(TxList, Digest), RedactError> {
    let old_id = old.txid();
    let pos = list
        .slots
        .iter()
        .position(|s| s.tx.txid() == old_id)
        .ok_or(RedactError::TxNotFound)?;
    if !validate_candidate_tx(old, cand) {
        return Err(RedactError::CandidateMalformed);
    }
    let mut out = list.clone();
    let slot = &mut out.slots[pos];
    slot.old_txid = Some(slot.old_txid.unwrap_or(old_id));
    slot.tx = cand.clone();
    let root = out.merkle_root();
    Ok((out, root))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LedgerBlock {
    pub header: BlockHeader,
    pub txs: TxList,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerChain {
    pub blocks: Vec<LedgerBlock>,
    pub difficulty: DifficultyTarget,
}

impl LedgerChain {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block at 1-based `height`.
    pub fn get(&self, height: usize) -> Option<&LedgerBlock> {
        height.checked_sub(1).and_then(|i| self.blocks.get(i))
    }

    pub fn get_mut(&mut self, height: usize) -> Option<&mut LedgerBlock> {
        height.checked_sub(1).and_then(|i| self.blocks.get_mut(i))
    }

    pub fn head(&self) -> Option<&LedgerBlock> {
        self.blocks.last()
    }

    /// Applies a redaction in place, updating the header's merkle root.
    pub fn redact(&mut self, height: usize, old: &Transaction, cand: &Transaction) -> Result<(), RedactError> {
        let block = self.get_mut(height).ok_or(RedactError::TxNotFound)?;
        let (txs, root) = apply_tx_redaction(&block.txs, old, cand)?;
        block.txs = txs;
        block.header.merkle_root = root;
        Ok(())
    }
}

/// Coinbase paying `amount` to `miner` and carrying `votes` as data outputs.
pub fn coinbase(height: usize, miner: &VerifyingKey, amount: u64, votes: &[Digest]) -> Transaction {
    let mut outputs = vec![TxOutput::pay(miner, amount)];
    outputs.extend(votes.iter().map(|v| TxOutput::data(v.0.to_vec())));
    Transaction {
        inputs: vec![TxInput {
            prev_txid: Digest::ZERO,
            output_index: height as u32,
            witness: Vec::new(),
        }],
        outputs,
        is_coinbase: true,
    }
}

/// Genesis block: no proof of work, zero predecessor.
pub fn ledger_genesis(coinbase_tx: Transaction, difficulty: DifficultyTarget) -> LedgerBlock {
    let txs = TxList::from_txs(vec![coinbase_tx]);
    let root = txs.merkle_root();
    LedgerBlock {
        header: BlockHeader {
            hash_prev: Digest::ZERO,
            merkle_root: root,
            difficulty,
            timestamp: 0,
            nonce: 0,
            old_merkle_root: root,
        },
        txs,
    }
}

/// Searches nonces for a block on top of `prev_id`.
pub fn mine_ledger_block(
    prev_id: Digest,
    txs: TxList,
    difficulty: DifficultyTarget,
    timestamp: u64,
    max_attempts: u64,
    seed: u64,
) -> Option<LedgerBlock> {
    let root = txs.merkle_root();
    let mut header = BlockHeader {
        hash_prev: prev_id,
        merkle_root: root,
        difficulty,
        timestamp,
        nonce: ChaCha8Rng::seed_from_u64(seed).gen(),
        old_merkle_root: root,
    };
    for _ in 0..max_attempts {
        if meets_target(&header.id(), &difficulty) {
            return Some(LedgerBlock { header, txs });
        }
        header.nonce = header.nonce.wrapping_add(1);
    }
    None
}
