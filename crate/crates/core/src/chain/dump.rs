//! JSON Lines chain dumps: one header line, then one line per block.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Block, BlockPayload, Chain, Mode, OldState};
use crate::hashcore::{Digest, DifficultyTarget, HexError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub difficulty_hex: String,
    pub genesis_digest_hex: String,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadRecord {
    pub entries_hex: Vec<String>,
    pub votes_hex: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: usize,
    pub s_hex: String,
    pub payload: PayloadRecord,
    pub ctr: u64,
    pub y_segments_hex: Vec<String>,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Hex { line: usize, source: HexError },
    #[error("line {line}: bad hex: {source}")]
    RawHex { line: usize, source: hex::FromHexError },
    #[error("missing header line")]
    MissingHeader,
    #[error("line {line}: expected height {expected}, found {found}")]
    HeightGap {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: block has no old-state segments")]
    EmptyOldState { line: usize },
    #[error("genesis digest in header does not match block 1")]
    GenesisMismatch,
}

impl BlockRecord {
    pub fn from_block(height: usize, b: &Block) -> Self {
        BlockRecord {
            height,
            s_hex: b.s.to_hex(),
            payload: PayloadRecord {
                entries_hex: b.payload.entries.iter().map(hex::encode).collect(),
                votes_hex: b.payload.votes.iter().map(Digest::to_hex).collect(),
            },
            ctr: b.ctr,
            y_segments_hex: b.y.segments().iter().map(Digest::to_hex).collect(),
        }
    }

    pub fn to_block(&self, line: usize) -> Result<Block, DumpError> {
        let digest = |s: &str| Digest::from_hex(s).map_err(|source| DumpError::Hex { line, source });
        let entries = self
            .payload
            .entries_hex
            .iter()
            .map(|e| hex::decode(e).map_err(|source| DumpError::RawHex { line, source }))
            .collect::<Result<Vec<_>, _>>()?;
        let votes = self
            .payload
            .votes_hex
            .iter()
            .map(|v| digest(v))
            .collect::<Result<Vec<_>, _>>()?;
        let segments = self
            .y_segments_hex
            .iter()
            .map(|v| digest(v))
            .collect::<Result<Vec<_>, _>>()?;
        let y = OldState::from_segments(segments).map_err(|_| DumpError::EmptyOldState { line })?;
        Ok(Block {
            s: digest(&self.s_hex)?,
            payload: BlockPayload::new(entries, votes),
            ctr: self.ctr,
            y,
        })
    }
}

/// Writes `c` as JSON Lines. The genesis digest is the link digest of block 1
/// (all zeros for an empty chain).
pub fn write_chain<W: Write>(mut w: W, c: &Chain, mode: Mode) -> Result<(), DumpError> {
    let header = ChainHeader {
        difficulty_hex: c.difficulty().to_hex(),
        genesis_digest_hex: c
            .genesis()
            .map(Block::link_digest)
            .unwrap_or(Digest::ZERO)
            .to_hex(),
        mode,
    };
    serde_json::to_writer(&mut w, &header).map_err(|source| DumpError::Json { line: 1, source })?;
    w.write_all(b"\n")?;
    for (i, b) in c.blocks().iter().enumerate() {
        let rec = BlockRecord::from_block(i + 1, b);
        serde_json::to_writer(&mut w, &rec)
            .map_err(|source| DumpError::Json { line: i + 2, source })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_chain<R: BufRead>(r: R) -> Result<(Chain, ChainHeader), DumpError> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (line, first) = lines.next().ok_or(DumpError::MissingHeader)?;
    let header: ChainHeader =
        serde_json::from_str(&first?).map_err(|source| DumpError::Json { line, source })?;
    let difficulty = DifficultyTarget::from_hex(&header.difficulty_hex)
        .map_err(|source| DumpError::Hex { line, source })?;
    let mut blocks = Vec::new();
    for (line, text) in lines {
        let rec: BlockRecord =
            serde_json::from_str(&text?).map_err(|source| DumpError::Json { line, source })?;
        if rec.height != blocks.len() + 1 {
            return Err(DumpError::HeightGap {
                line,
                expected: blocks.len() + 1,
                found: rec.height,
            });
        }
        blocks.push(rec.to_block(line)?);
    }
    if let Some(g) = blocks.first() {
        let pinned = Digest::from_hex(&header.genesis_digest_hex)
            .map_err(|source| DumpError::Hex { line: 1, source })?;
        if g.link_digest() != pinned {
            return Err(DumpError::GenesisMismatch);
        }
    }
    Ok((Chain::from_blocks(blocks, difficulty), header))
}
