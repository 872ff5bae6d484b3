//! JSON Lines dumps for ledger chains.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::block::{BlockHeader, LedgerBlock, LedgerChain, TxList, TxSlot};
use super::tx::Transaction;
use crate::chain::DumpError;
use crate::hashcore::{Digest, DifficultyTarget};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerDumpHeader {
    pub difficulty_hex: String,
    pub genesis_digest_hex: String,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderRecord {
    pub hash_prev_hex: String,
    pub merkle_root_hex: String,
    pub difficulty_hex: String,
    pub timestamp: u64,
    pub nonce: u64,
    pub old_merkle_root_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionRecord {
    pub tx_index: usize,
    pub old_txid_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerBlockRecord {
    pub height: usize,
    pub header: HeaderRecord,
    pub txs: Vec<String>,
    pub redactions: Vec<RedactionRecord>,
}

pub const LEDGER_MODE: &str = "ledger";

pub fn write_ledger_chain<W: Write>(mut w: W, c: &LedgerChain) -> Result<(), DumpError> {
    let header = LedgerDumpHeader {
        difficulty_hex: c.difficulty.to_hex(),
        genesis_digest_hex: c.blocks.first().map(|b| b.header.id()).unwrap_or(Digest::ZERO).to_hex(),
        mode: LEDGER_MODE.to_string(),
    };
    serde_json::to_writer(&mut w, &header).map_err(|source| DumpError::Json { line: 1, source })?;
    w.write_all(b"\n")?;
    for (i, b) in c.blocks.iter().enumerate() {
        let h = &b.header;
        let rec = LedgerBlockRecord {
            height: i + 1,
            header: HeaderRecord {
                hash_prev_hex: h.hash_prev.to_hex(),
                merkle_root_hex: h.merkle_root.to_hex(),
                difficulty_hex: h.difficulty.to_hex(),
                timestamp: h.timestamp,
                nonce: h.nonce,
                old_merkle_root_hex: h.old_merkle_root.to_hex(),
            },
            txs: b.txs.slots.iter().map(|s| hex::encode(s.tx.to_bytes())).collect(),
            redactions: b
                .txs
                .slots
                .iter()
                .enumerate()
                .filter_map(|(j, s)| {
                    s.old_txid.map(|o| RedactionRecord {
                        tx_index: j,
                        old_txid_hex: o.to_hex(),
                    })
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|source| DumpError::Json { line: i + 2, source })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn bad(line: usize, what: &str) -> DumpError {
    DumpError::Io(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!("line {line}: {what}"),
    ))
}

pub fn read_ledger_chain<R: BufRead>(r: R) -> Result<LedgerChain, DumpError> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (line, first) = lines.next().ok_or(DumpError::MissingHeader)?;
    let header: LedgerDumpHeader =
        serde_json::from_str(&first?).map_err(|source| DumpError::Json { line, source })?;
    if header.mode != LEDGER_MODE {
        return Err(bad(line, "not a ledger dump"));
    }
    let hexd = |line: usize, s: &str| Digest::from_hex(s).map_err(|source| DumpError::Hex { line, source });
    let difficulty =
        DifficultyTarget::from_hex(&header.difficulty_hex).map_err(|source| DumpError::Hex { line, source })?;
    let mut blocks = Vec::new();
    for (line, text) in lines {
        let rec: LedgerBlockRecord =
            serde_json::from_str(&text?).map_err(|source| DumpError::Json { line, source })?;
        if rec.height != blocks.len() + 1 {
            return Err(DumpError::HeightGap {
                line,
                expected: blocks.len() + 1,
                found: rec.height,
            });
        }
        let mut slots = rec
            .txs
            .iter()
            .map(|t| {
                let raw = hex::decode(t).map_err(|source| DumpError::RawHex { line, source })?;
                let tx = Transaction::from_bytes(&raw).map_err(|e| bad(line, &e.to_string()))?;
                Ok(TxSlot::new(tx))
            })
            .collect::<Result<Vec<_>, DumpError>>()?;
        for r in &rec.redactions {
            let slot = slots.get_mut(r.tx_index).ok_or_else(|| bad(line, "redaction index out of range"))?;
            slot.old_txid = Some(hexd(line, &r.old_txid_hex)?);
        }
        let h = &rec.header;
        blocks.push(LedgerBlock {
            header: BlockHeader {
                hash_prev: hexd(line, &h.hash_prev_hex)?,
                merkle_root: hexd(line, &h.merkle_root_hex)?,
                difficulty: DifficultyTarget::from_hex(&h.difficulty_hex)
                    .map_err(|source| DumpError::Hex { line, source })?,
                timestamp: h.timestamp,
                nonce: h.nonce,
                old_merkle_root: hexd(line, &h.old_merkle_root_hex)?,
            },
            txs: TxList { slots },
        });
    }
    if let Some(g) = blocks.first() {
        if g.header.id() != hexd(1, &header.genesis_digest_hex)? {
            return Err(DumpError::GenesisMismatch);
        }
    }
    Ok(LedgerChain { blocks, difficulty })
}

/// Reads only the `mode` field of a dump's first line.
pub fn dump_mode<R: BufRead>(mut r: R) -> Result<String, DumpError> {
    #[derive(Deserialize)]
    struct ModeOnly {
        mode: String,
    }
    let mut first = String::new();
    r.read_line(&mut first)?;
    let m: ModeOnly = serde_json::from_str(&first).map_err(|source| DumpError::Json { line: 1, source })?;
    Ok(m.mode)
}
