//! Edit transactions and the consistency rule for candidate transactions.

use ed25519_dalek::SigningKey;
use thiserror::Error;

use super::tx::{OutPoint, OutputKind, Transaction, TxInput, TxOutput};
use crate::hashcore::{hash_h, Digest};

/// Prefix of the data output that marks an edit transaction.
pub const EDIT_TAG: &[u8; 4] = b"EDIT";
/// Smallest fee a relay would accept for an ordinary transaction.
pub const MIN_RELAY_FEE: u64 = 1_000;
/// Default minimum fee for an edit transaction.
pub const DEFAULT_MIN_EDIT_FEE: u64 = 10 * MIN_RELAY_FEE;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EditError {
    #[error("fee {fee} is below the minimum edit fee {min}")]
    FeeTooLow { fee: u64, min: u64 },
    #[error("candidate transaction is not a consistent redaction of the original")]
    CandidateMalformed,
    #[error("funding amount {amount} cannot cover fee {fee}")]
    InsufficientFunds { amount: u64, fee: u64 },
}

/// The spendable coin that pays for an edit transaction.
#[derive(Debug, Clone)]
pub struct Funding {
    pub outpoint: OutPoint,
    pub amount: u64,
    pub key: SigningKey,
}

/// `EDIT || old || cand`.
pub fn edit_marker(old: &Digest, cand: &Digest) -> Vec<u8> {
    let mut out = Vec::with_capacity(68);
    out.extend_from_slice(EDIT_TAG);
    out.extend_from_slice(old.as_ref());
    out.extend_from_slice(cand.as_ref());
    out
}

/// The `(old, cand)` pair carried by an edit transaction, if `tx` is one.
pub fn edit_pair(tx: &Transaction) -> Option<(Digest, Digest)> {
    if tx.is_coinbase {
        return None;
    }
    let first = tx.data_outputs().next()?;
    let s = &first.script;
    if s.len() != 68 || &s[..4] != EDIT_TAG {
        return None;
    }
    Some((
        Digest(s[4..36].try_into().expect("32 bytes")),
        Digest(s[36..68].try_into().expect("32 bytes")),
    ))
}

/// `H(old, cand)`: the token miners place in their coinbase to vote.
pub fn vote_token(old: &Digest, cand: &Digest) -> Digest {
    hash_h(&[old.as_ref(), cand.as_ref()])
}

pub fn vote_token_of(edit_tx: &Transaction) -> Option<Digest> {
    edit_pair(edit_tx).map(|(o, c)| vote_token(&o, &c))
}

fn is_subsequence(short: &[u8], long: &[u8]) -> bool {
    let mut it = long.iter();
    short.iter().all(|b| it.any(|x| x == b))
}

/// True iff `cand` equals `old` except that some data outputs lost bytes.
pub fn validate_candidate_tx(old: &Transaction, cand: &Transaction) -> bool {
    if old.is_coinbase || cand.is_coinbase || edit_pair(old).is_some() {
        return false;
    }
    if old.inputs != cand.inputs || old.outputs.len() != cand.outputs.len() {
        return false;
    }
    let mut shrunk = false;
    for (o, c) in old.outputs.iter().zip(&cand.outputs) {
        if o.kind != c.kind || o.amount != c.amount {
            return false;
        }
        match o.kind {
            OutputKind::Spendable => {
                if o.script != c.script {
                    return false;
                }
            }
            OutputKind::Data => {
                if !is_subsequence(&c.script, &o.script) {
                    return false;
                }
                shrunk |= c.script.len() < o.script.len();
            }
        }
    }
    shrunk
}

/// Builds and signs an edit transaction for `old -> cand`.
pub fn build_edit_tx(
    old: &Transaction,
    cand: &Transaction,
    funding: &Funding,
    fee: u64,
    min_fee: u64,
) -> Result<Transaction, EditError> {
    if fee < min_fee {
        return Err(EditError::FeeTooLow { fee, min: min_fee });
    }
    if !validate_candidate_tx(old, cand) {
        return Err(EditError::CandidateMalformed);
    }
    let change = funding
        .amount
        .checked_sub(fee)
        .ok_or(EditError::InsufficientFunds {
            amount: funding.amount,
            fee,
        })?;
    let mut tx = Transaction::new(
        vec![TxInput::new(funding.outpoint)],
        vec![
            TxOutput::data(edit_marker(&old.txid(), &cand.txid())),
            TxOutput::pay(&funding.key.verifying_key(), change),
        ],
    );
    tx.sign_all(&funding.key);
    Ok(tx)
}
