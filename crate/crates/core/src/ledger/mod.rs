//! Bitcoin-style transaction layer: data outputs, merkle trees with an
//! `old_merkle_root` header field, edit transactions, coinbase voting, UTXO
//! lineage and victim accountability.

mod accountability;
mod block;
mod builder;
mod dump;
mod edit;
mod merkle;
mod rules;
mod tx;
mod utxo;
mod validate;

pub use accountability::{verify_victim_claim, NotARedactedSlot};
pub use block::{
    apply_tx_redaction, coinbase, ledger_genesis, mine_ledger_block, BlockHeader, LedgerBlock, LedgerChain,
    RedactError, TxList, TxSlot, SUBSIDY,
};
pub use builder::{BuildError, LedgerBuilder};
pub use dump::{
    dump_mode, read_ledger_chain, write_ledger_chain, HeaderRecord, LedgerBlockRecord, LedgerDumpHeader,
    RedactionRecord, LEDGER_MODE,
};
pub use edit::{
    build_edit_tx, edit_marker, edit_pair, validate_candidate_tx, vote_token, vote_token_of, EditError, Funding,
    DEFAULT_MIN_EDIT_FEE, EDIT_TAG, MIN_RELAY_FEE,
};
pub use merkle::{merkle_root, EmptyLeaves};
pub use rules::{changed_pairs, endorse_ledger_edit, ledger_edit_admitted, LedgerRules};
pub use tx::{
    decode_fields, signing_key, verify_witness, DecodeError, OutPoint, OutputKind, Transaction, TxInput, TxOutput,
    MAX_DATA_BYTES,
};
pub use utxo::{SpendError, UtxoEntry, UtxoSet};
pub use validate::{
    replay_ledger_chain, validate_ledger_block, validate_ledger_chain, validate_ledger_chain_immutable, EditIndex,
    LedgerFault, LedgerFaultKind, LedgerOptions, LedgerParams, LedgerReport,
};

/// Id of a transaction: the digest of its witness-stripped encoding.
pub fn tx_id_of(tx: &Transaction) -> crate::hashcore::Digest {
    tx.txid()
}
