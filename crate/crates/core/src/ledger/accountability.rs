use thiserror::Error;

use super::block::LedgerChain;
use super::tx::Transaction;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("slot ({height}, {tx_index}) does not hold a redacted transaction")]
pub struct NotARedactedSlot {
    pub height: usize,
    pub tx_index: usize,
}

/// Checks a claim that `claimed` is the transaction removed from the given
/// slot. Bytes that do not parse as a transaction are a failed claim.
pub fn verify_victim_claim(
    claimed: &[u8],
    slot: (usize, usize),
    c: &LedgerChain,
) -> Result<bool, NotARedactedSlot> {
    let (height, tx_index) = slot;
    let old = c
        .get(height)
        .and_then(|b| b.txs.slots.get(tx_index))
        .and_then(|s| s.old_txid)
        .ok_or(NotARedactedSlot { height, tx_index })?;
    Ok(Transaction::from_bytes(claimed).is_ok_and(|tx| tx.txid() == old))
}
