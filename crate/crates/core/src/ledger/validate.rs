//! Ledger block and chain validation.
//!
//! Validation is one forward pass that maintains the UTXO set. Redacted slots
//! are collected on the way and checked against edit transactions and
//! coinbase votes once the whole chain has been seen.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::block::{LedgerChain, SUBSIDY};
use super::edit::{edit_pair, vote_token, DEFAULT_MIN_EDIT_FEE};
use super::tx::{verify_witness, OutputKind, Transaction, MAX_DATA_BYTES};
use super::utxo::{SpendError, UtxoSet};
use crate::hashcore::{meets_target, Digest};
use crate::redaction::{PolicyParams, PolicyVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerParams {
    pub policy: PolicyParams,
    pub min_edit_fee: u64,
}

impl LedgerParams {
    pub fn new(policy: PolicyParams) -> Self {
        LedgerParams {
            policy,
            min_edit_fee: DEFAULT_MIN_EDIT_FEE,
        }
    }

    /// Voting window for an edit transaction mined at height `e`: the `l`
    /// blocks after it has become `k` deep.
    pub fn window(&self, e: usize) -> (usize, usize) {
        let start = e + self.policy.k + 1;
        (start, start + self.policy.ell - 1)
    }

    /// Verdict for an edit mined at `e` on a chain of length `n`, given the
    /// sorted heights whose coinbase carries its vote token.
    pub fn verdict(&self, e: usize, n: usize, heights: &[usize]) -> PolicyVerdict {
        let (start, end) = self.window(e);
        if end + self.policy.k > n {
            return PolicyVerdict::Voting;
        }
        let lo = heights.partition_point(|&h| h < start);
        let hi = heights.partition_point(|&h| h <= end);
        if hi - lo >= self.policy.threshold() {
            PolicyVerdict::Accept
        } else {
            PolicyVerdict::Reject
        }
    }

    /// Whether an accepted edit mined at `e` must already be applied on a
    /// chain of length `n`. Nodes apply it when the chain reaches the
    /// acceptance height, so one extra block of grace is allowed.
    pub fn must_be_applied(&self, e: usize, n: usize) -> bool {
        e + 2 * self.policy.k + self.policy.ell < n
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerOptions {
    pub check_signatures: bool,
}

impl LedgerOptions {
    pub fn full() -> Self {
        LedgerOptions {
            check_signatures: true,
        }
    }

    /// Skips witness verification, as done for historical blocks by
    /// assume-valid nodes.
    pub fn assume_valid() -> Self {
        LedgerOptions {
            check_signatures: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerFaultKind {
    EmptyChain,
    GenesisMalformed,
    DifficultyMismatch,
    BrokenLink,
    MerkleMismatch,
    OldMerkleMismatch,
    PowFailed,
    CoinbaseMalformed,
    CoinbaseOverpays,
    TxMalformed { index: usize },
    Spend { index: usize, error: SpendError },
    BadSignature { index: usize },
    ValueCreated { index: usize },
    EditFeeTooLow { index: usize },
    RedactionForbidden { index: usize },
    UnapprovedRedaction { index: usize, verdict: PolicyVerdict },
    ApprovedNotPerformed { old_txid: Digest },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct LedgerFault {
    pub height: usize,
    pub kind: LedgerFaultKind,
}

impl fmt::Display for LedgerFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "height {}: {:?}", self.height, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LedgerReport {
    pub blocks: usize,
    pub transactions: usize,
    pub redacted_slots: usize,
    pub edit_txs: usize,
}

/// Edit transactions and coinbase votes found in a chain.
#[derive(Debug, Clone, Default)]
pub struct EditIndex {
    /// `(old, cand)` to the height of the first edit transaction for it.
    pub edits: HashMap<(Digest, Digest), usize>,
    /// Vote token to the sorted heights whose coinbase carries it.
    pub votes: HashMap<Digest, Vec<usize>>,
}

impl EditIndex {
    /// Collects edits and votes without validating anything.
    pub fn scan(c: &LedgerChain) -> Self {
        let mut idx = EditIndex::default();
        for (i, b) in c.blocks.iter().enumerate() {
            for (j, slot) in b.txs.slots.iter().enumerate() {
                if j == 0 && slot.tx.is_coinbase {
                    idx.note_votes(i + 1, &slot.tx);
                } else if let Some(pair) = edit_pair(&slot.tx) {
                    idx.edits.entry(pair).or_insert(i + 1);
                }
            }
        }
        idx
    }

    fn note_votes(&mut self, height: usize, coinbase: &Transaction) {
        for out in coinbase.data_outputs() {
            if let Ok(raw) = <[u8; 32]>::try_from(out.script.as_slice()) {
                let hs = self.votes.entry(Digest(raw)).or_default();
                if hs.last() != Some(&height) {
                    hs.push(height);
                }
            }
        }
    }

    pub fn verdict(&self, params: &LedgerParams, n: usize, old: &Digest, cand: &Digest) -> PolicyVerdict {
        match self.edits.get(&(*old, *cand)) {
            None => PolicyVerdict::Voting,
            Some(&e) => {
                let token = vote_token(old, cand);
                let hs = self.votes.get(&token).map(Vec::as_slice).unwrap_or(&[]);
                params.verdict(e, n, hs)
            }
        }
    }
}

struct RedactedSlot {
    height: usize,
    index: usize,
    old: Digest,
    new: Digest,
}

struct Pass<'a> {
    c: &'a LedgerChain,
    /// `None` validates as a chain that never allows edits.
    params: Option<&'a LedgerParams>,
    opts: LedgerOptions,
    utxo: UtxoSet,
    index: EditIndex,
    redacted: Vec<RedactedSlot>,
    redacted_old: HashMap<Digest, Digest>,
    report: LedgerReport,
}

impl<'a> Pass<'a> {
    fn new(c: &'a LedgerChain, params: Option<&'a LedgerParams>, opts: LedgerOptions, utxo: UtxoSet) -> Self {
        Pass {
            c,
            params,
            opts,
            utxo,
            index: EditIndex::default(),
            redacted: Vec::new(),
            redacted_old: HashMap::new(),
            report: LedgerReport::default(),
        }
    }

    fn block(&mut self, h: usize) -> Result<(), LedgerFault> {
        let fault = |kind| LedgerFault { height: h, kind };
        let redactable = self.params.is_some();
        let b = self.c.get(h).expect("height in range");
        let header = &b.header;
        if header.difficulty != self.c.difficulty {
            return Err(fault(LedgerFaultKind::DifficultyMismatch));
        }
        match h {
            1 => {
                if header.hash_prev != Digest::ZERO {
                    return Err(fault(LedgerFaultKind::GenesisMalformed));
                }
            }
            _ => {
                let prev = &self.c.get(h - 1).expect("h >= 2").header;
                let linked = header.hash_prev == prev.id()
                    || (redactable && header.hash_prev == prev.original_id());
                if !linked {
                    return Err(fault(LedgerFaultKind::BrokenLink));
                }
            }
        }

        let txids = b.txs.txids();
        if b.txs.merkle_root_with(&txids) != header.merkle_root {
            return Err(fault(LedgerFaultKind::MerkleMismatch));
        }
        let redacted_block = b.txs.is_redacted();
        if redacted_block {
            if !redactable {
                return Err(fault(LedgerFaultKind::RedactionForbidden { index: 0 }));
            }
            if b.txs.old_merkle_root_with(&txids) != header.old_merkle_root {
                return Err(fault(LedgerFaultKind::OldMerkleMismatch));
            }
        } else if header.old_merkle_root != header.merkle_root {
            return Err(fault(LedgerFaultKind::OldMerkleMismatch));
        }
        if h > 1 {
            let d = &self.c.difficulty;
            let pow = meets_target(&header.id(), d)
                || (redacted_block && meets_target(&header.original_id(), d));
            if !pow {
                return Err(fault(LedgerFaultKind::PowFailed));
            }
        }

        let slots = &b.txs.slots;
        let Some(cb_slot) = slots.first() else {
            return Err(fault(LedgerFaultKind::CoinbaseMalformed));
        };
        let cb = &cb_slot.tx;
        let cb_ok = cb.is_coinbase
            && cb_slot.old_txid.is_none()
            && cb.inputs.len() == 1
            && cb.inputs[0].prev_txid == Digest::ZERO
            && cb.inputs[0].output_index as usize == h
            && cb.inputs[0].witness.is_empty()
            && cb.data_outputs().all(|o| {
                o.amount == 0
                    && if redactable {
                        o.script.len() == 32
                    } else {
                        o.script.len() <= MAX_DATA_BYTES
                    }
            });
        if !cb_ok {
            return Err(fault(LedgerFaultKind::CoinbaseMalformed));
        }
        if redactable {
            let mut tokens: Vec<&[u8]> = cb.data_outputs().map(|o| o.script.as_slice()).collect();
            tokens.sort_unstable();
            if tokens.windows(2).any(|w| w[0] == w[1]) {
                return Err(fault(LedgerFaultKind::CoinbaseMalformed));
            }
            self.index.note_votes(h, cb);
        }

        let mut fees: u64 = 0;
        for (i, slot) in slots.iter().enumerate().skip(1) {
            let tx = &slot.tx;
            let txid = txids[i];
            let key = slot.original_txid(&txid);
            if tx.is_coinbase || tx.inputs.is_empty() || tx.outputs.is_empty() {
                return Err(fault(LedgerFaultKind::TxMalformed { index: i }));
            }
            if tx
                .outputs
                .iter()
                .any(|o| o.kind == OutputKind::Data && (o.amount != 0 || o.script.len() > MAX_DATA_BYTES))
            {
                return Err(fault(LedgerFaultKind::TxMalformed { index: i }));
            }
            let mut inflow: u64 = 0;
            for input in &tx.inputs {
                let spent = self
                    .utxo
                    .register_spend_by(&input.outpoint(), key)
                    .map_err(|error| fault(LedgerFaultKind::Spend { index: i, error }))?;
                if self.opts.check_signatures && !verify_witness(&spent.script, &input.witness, &key) {
                    return Err(fault(LedgerFaultKind::BadSignature { index: i }));
                }
                inflow = inflow
                    .checked_add(spent.amount)
                    .ok_or(fault(LedgerFaultKind::ValueCreated { index: i }))?;
            }
            let outflow = tx
                .output_total()
                .ok_or(fault(LedgerFaultKind::ValueCreated { index: i }))?;
            let fee = inflow
                .checked_sub(outflow)
                .ok_or(fault(LedgerFaultKind::ValueCreated { index: i }))?;
            fees = fees.saturating_add(fee);

            if let Some(params) = self.params {
                if let Some(pair) = edit_pair(tx) {
                    if slot.old_txid.is_some() {
                        return Err(fault(LedgerFaultKind::RedactionForbidden { index: i }));
                    }
                    if fee < params.min_edit_fee {
                        return Err(fault(LedgerFaultKind::EditFeeTooLow { index: i }));
                    }
                    self.index.edits.entry(pair).or_insert(h);
                    self.report.edit_txs += 1;
                }
                if let Some(old) = slot.old_txid {
                    self.utxo.add_alias(txid, old);
                    self.redacted_old.insert(old, txid);
                    self.redacted.push(RedactedSlot {
                        height: h,
                        index: i,
                        old,
                        new: txid,
                    });
                }
            }
            self.utxo.add_outputs(key, tx);
        }
        if h > 1 {
            let paid = cb
                .output_total()
                .ok_or(fault(LedgerFaultKind::CoinbaseOverpays))?;
            if paid > SUBSIDY.saturating_add(fees) {
                return Err(fault(LedgerFaultKind::CoinbaseOverpays));
            }
        }
        self.utxo.add_outputs(txids[0], cb);
        self.report.blocks += 1;
        self.report.transactions += slots.len();
        Ok(())
    }

    fn check_redacted(&self, slots: &[RedactedSlot], index: &EditIndex) -> Result<(), LedgerFault> {
        let params = self.params.expect("redactable pass");
        let n = self.c.len();
        for s in slots {
            let verdict = index.verdict(params, n, &s.old, &s.new);
            if verdict != PolicyVerdict::Accept {
                return Err(LedgerFault {
                    height: s.height,
                    kind: LedgerFaultKind::UnapprovedRedaction {
                        index: s.index,
                        verdict,
                    },
                });
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<(LedgerReport, UtxoSet), LedgerFault> {
        if let Some(params) = self.params {
            self.check_redacted(&self.redacted, &self.index)?;
            let n = self.c.len();
            let mut pending: Vec<(&(Digest, Digest), &usize)> = self.index.edits.iter().collect();
            pending.sort_by_key(|(pair, e)| (**e, **pair));
            for (&(old, cand), &e) in pending {
                if !params.must_be_applied(e, n) || self.redacted_old.contains_key(&old) {
                    continue;
                }
                if !self.utxo.contains_tx(&old) {
                    continue;
                }
                if self.index.verdict(params, n, &old, &cand) == PolicyVerdict::Accept {
                    return Err(LedgerFault {
                        height: e,
                        kind: LedgerFaultKind::ApprovedNotPerformed { old_txid: old },
                    });
                }
            }
            self.report.redacted_slots = self.redacted.len();
        }
        Ok((self.report, self.utxo))
    }
}

fn run(c: &LedgerChain, params: Option<&LedgerParams>, opts: LedgerOptions) -> Result<(LedgerReport, UtxoSet), LedgerFault> {
    if c.is_empty() {
        return Err(LedgerFault {
            height: 0,
            kind: LedgerFaultKind::EmptyChain,
        });
    }
    let outputs = c.blocks.iter().flat_map(|b| &b.txs.slots).map(|s| s.tx.outputs.len()).sum();
    let mut pass = Pass::new(c, params, opts, UtxoSet::with_capacity(outputs));
    for h in 1..=c.len() {
        pass.block(h)?;
    }
    pass.finish()
}

/// Validates a ledger chain that may contain approved redactions.
pub fn validate_ledger_chain(
    c: &LedgerChain,
    params: &LedgerParams,
    opts: LedgerOptions,
) -> Result<LedgerReport, LedgerFault> {
    run(c, Some(params), opts).map(|(r, _)| r)
}

/// Like [`validate_ledger_chain`] but also returns the final UTXO set.
pub fn replay_ledger_chain(
    c: &LedgerChain,
    params: &LedgerParams,
    opts: LedgerOptions,
) -> Result<(LedgerReport, UtxoSet), LedgerFault> {
    run(c, Some(params), opts)
}

/// Baseline validator for a chain without any redaction support.
pub fn validate_ledger_chain_immutable(c: &LedgerChain, opts: LedgerOptions) -> Result<LedgerReport, LedgerFault> {
    run(c, None, opts).map(|(r, _)| r)
}

/// Validates block `height` of `c` on top of `utxo`, which must hold the
/// state after block `height - 1`. Redacted slots are checked against the
/// edits and votes anywhere in `c`.
pub fn validate_ledger_block(
    c: &LedgerChain,
    height: usize,
    utxo: &mut UtxoSet,
    params: &LedgerParams,
    opts: LedgerOptions,
) -> Result<(), LedgerFault> {
    if height == 0 || height > c.len() {
        return Err(LedgerFault {
            height,
            kind: LedgerFaultKind::EmptyChain,
        });
    }
    let mut pass = Pass::new(c, Some(params), opts, std::mem::take(utxo));
    let result = pass.block(height).and_then(|()| {
        let index = EditIndex::scan(c);
        pass.check_redacted(&pass.redacted, &index)
    });
    *utxo = pass.utxo;
    result
}
