//! Unspent outputs keyed by original transaction id, with an alias from each
//! redacted version's id to the original.

use std::collections::HashMap;

use thiserror::Error;

use super::tx::{OutPoint, OutputKind, Transaction, TxOutput};
use crate::hashcore::Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SpendError {
    #[error("output already spent")]
    AlreadySpent,
    #[error("output does not exist")]
    UnknownOutput,
    #[error("data outputs cannot be spent")]
    DataOutputUnspendable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtxoEntry {
    pub output: TxOutput,
    pub spent_by: Option<Digest>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UtxoSet {
    entries: HashMap<OutPoint, UtxoEntry>,
    alias: HashMap<Digest, Digest>,
}

impl UtxoSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// An empty set with room for `outputs` entries.
    pub fn with_capacity(outputs: usize) -> Self {
        UtxoSet {
            entries: HashMap::with_capacity(outputs),
            alias: HashMap::new(),
        }
    }

    /// Records every output of `tx` under `key` (the original txid).
    pub fn add_outputs(&mut self, key: Digest, tx: &Transaction) {
        for (i, out) in tx.outputs.iter().enumerate() {
            self.entries.insert(
                OutPoint {
                    txid: key,
                    index: i as u32,
                },
                UtxoEntry {
                    output: out.clone(),
                    spent_by: None,
                },
            );
        }
    }

    /// Links a redacted version's id to the original.
    pub fn add_alias(&mut self, new: Digest, old: Digest) {
        if new != old {
            self.alias.insert(new, old);
        }
    }

    pub fn resolve(&self, op: &OutPoint) -> OutPoint {
        match self.alias.get(&op.txid) {
            Some(old) => OutPoint {
                txid: *old,
                index: op.index,
            },
            None => *op,
        }
    }

    pub fn get(&self, op: &OutPoint) -> Option<&UtxoEntry> {
        self.entries.get(&self.resolve(op))
    }

    pub fn contains_tx(&self, txid: &Digest) -> bool {
        self.get(&OutPoint { txid: *txid, index: 0 }).is_some()
    }

    pub fn is_spendable(&self, op: &OutPoint) -> bool {
        self.get(op)
            .is_some_and(|e| e.spent_by.is_none() && e.output.kind == OutputKind::Spendable)
    }

    /// Marks the output spent for every alias at once and returns it.
    pub fn register_spend_by(&mut self, op: &OutPoint, spender: Digest) -> Result<TxOutput, SpendError> {
        let key = self.resolve(op);
        let entry = self.entries.get_mut(&key).ok_or(SpendError::UnknownOutput)?;
        if entry.output.kind == OutputKind::Data {
            return Err(SpendError::DataOutputUnspendable);
        }
        if entry.spent_by.is_some() {
            return Err(SpendError::AlreadySpent);
        }
        entry.spent_by = Some(spender);
        Ok(entry.output.clone())
    }

    pub fn register_spend(&mut self, op: &OutPoint, spender: &Transaction) -> Result<TxOutput, SpendError> {
        self.register_spend_by(op, spender.txid())
    }

    /// Total value of unspent spendable outputs.
    pub fn spendable_value(&self) -> u128 {
        self.entries
            .values()
            .filter(|e| e.spent_by.is_none() && e.output.kind == OutputKind::Spendable)
            .map(|e| u128::from(e.output.amount))
            .sum()
    }
}
