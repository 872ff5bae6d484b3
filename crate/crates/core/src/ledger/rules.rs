//! Ledger rules for the generic chain: payload entries are encoded
//! transactions and edits need an on-chain edit transaction.

use super::edit::{edit_pair, validate_candidate_tx};
use super::tx::{OutputKind, Transaction, MAX_DATA_BYTES};
use crate::chain::{BlockPayload, Chain, PayloadRules, Structural};
use crate::redaction::CandidateBlock;

#[derive(Debug, Clone, Copy, Default)]
pub struct LedgerRules;

fn well_formed(tx: &Transaction) -> bool {
    !tx.is_coinbase
        && tx
            .outputs
            .iter()
            .all(|o| o.kind == OutputKind::Spendable || (o.amount == 0 && o.script.len() <= MAX_DATA_BYTES))
}

impl PayloadRules for LedgerRules {
    fn validate_payload(&self, payload: &BlockPayload) -> bool {
        Structural.validate_payload(payload)
            && payload
                .entries
                .iter()
                .all(|e| Transaction::from_bytes(e).is_ok_and(|tx| well_formed(&tx)))
    }
}

/// Entry pairs that differ between the original and the candidate payload,
/// decoded. `None` if the payloads cannot be a ledger redaction.
pub fn changed_pairs(original: &BlockPayload, cand: &BlockPayload) -> Option<Vec<(Transaction, Transaction)>> {
    if original.votes != cand.votes || original.entries.len() != cand.entries.len() {
        return None;
    }
    let mut out = Vec::new();
    for (o, c) in original.entries.iter().zip(&cand.entries) {
        if o != c {
            let o = Transaction::from_bytes(o).ok()?;
            let c = Transaction::from_bytes(c).ok()?;
            out.push((o, c));
        }
    }
    Some(out)
}

/// Honest scrutiny: every changed transaction only lost data bytes.
pub fn endorse_ledger_edit(original: &BlockPayload, cand: &BlockPayload) -> bool {
    changed_pairs(original, cand)
        .is_some_and(|pairs| !pairs.is_empty() && pairs.iter().all(|(o, c)| validate_candidate_tx(o, c)))
}

/// A candidate is only pooled once every changed transaction has an edit
/// transaction at least `k` blocks deep; anything else is spam.
pub fn ledger_edit_admitted(c: &Chain, cand: &CandidateBlock, k: usize) -> bool {
    let Some(original) = c.get(cand.target_index) else {
        return false;
    };
    let Some(pairs) = changed_pairs(&original.payload, &cand.block.payload) else {
        return false;
    };
    if pairs.is_empty() {
        return false;
    }
    let stable = c.len().saturating_sub(k);
    let edits: Vec<_> = c.blocks()[..stable]
        .iter()
        .flat_map(|b| b.payload.entries.iter())
        .filter_map(|e| Transaction::from_bytes(e).ok().and_then(|tx| edit_pair(&tx)))
        .collect();
    pairs
        .iter()
        .all(|(o, n)| edits.contains(&(o.txid(), n.txid())))
}
