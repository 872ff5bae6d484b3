use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{candidate_for, CandidateBlock};
use crate::chain::{BlockPayload, Chain, Mode};
use crate::hashcore::Digest;

/// Candidate as broadcast between nodes. Votes and old state are not sent;
/// the receiver copies them from its own copy of the target block and checks
/// the declared digest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateWire {
    pub target_index: usize,
    pub payload_entries_hex: Vec<String>,
    pub declared_digest_hex: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("target block {0} is not in the local chain")]
    UnknownTarget(usize),
    #[error("malformed hex in candidate message")]
    BadHex,
    #[error("recomputed digest does not match the declared one")]
    DigestMismatch,
}

impl CandidateWire {
    pub fn from_candidate(cand: &CandidateBlock) -> Self {
        CandidateWire {
            target_index: cand.target_index,
            payload_entries_hex: cand.block.payload.entries.iter().map(hex::encode).collect(),
            declared_digest_hex: cand.digest().to_hex(),
        }
    }

    pub fn declared_digest(&self) -> Result<Digest, WireError> {
        Digest::from_hex(&self.declared_digest_hex).map_err(|_| WireError::BadHex)
    }

    pub fn to_candidate(&self, c: &Chain, mode: Mode) -> Result<CandidateBlock, WireError> {
        let j = self.target_index;
        let original = c
            .get(j)
            .filter(|_| j >= 2)
            .ok_or(WireError::UnknownTarget(j))?;
        let entries = self
            .payload_entries_hex
            .iter()
            .map(|e| hex::decode(e).map_err(|_| WireError::BadHex))
            .collect::<Result<Vec<_>, _>>()?;
        let payload = BlockPayload::new(entries, original.payload.votes.clone());
        let cand = candidate_for(original, j, payload, mode);
        if cand.digest() != self.declared_digest()? {
            return Err(WireError::DigestMismatch);
        }
        Ok(cand)
    }
}
