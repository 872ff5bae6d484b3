use std::collections::BTreeMap;

use super::{CandidateBlock, PolicyVerdict, VoteIndex};
use crate::chain::{Chain, Validator};
use crate::hashcore::Digest;

/// Pending candidates keyed by their vote token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidatePool {
    entries: BTreeMap<Digest, CandidateBlock>,
}

impl CandidatePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.entries.contains_key(digest)
    }

    pub fn get(&self, digest: &Digest) -> Option<&CandidateBlock> {
        self.entries.get(digest)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Digest, &CandidateBlock)> {
        self.entries.iter()
    }

    /// Inserts `cand` if it validates against `c`. Returns true iff the pool
    /// grew; re-inserting a known candidate is a no-op.
    pub fn upsert(
        &mut self,
        c: &Chain,
        cand: CandidateBlock,
        validator: &Validator<'_>,
        votes: &VoteIndex,
    ) -> bool {
        let digest = cand.digest();
        if self.entries.contains_key(&digest) {
            return false;
        }
        if validator
            .check_candidate(c, cand.target_index, &cand.block, votes)
            .is_err()
        {
            return false;
        }
        self.entries.insert(digest, cand);
        true
    }

    /// Evaluates every entry. Accepted and rejected entries leave the pool;
    /// voting entries stay. Accepted candidates are returned by ascending
    /// target index; for a contested index only the one whose window opened
    /// first is kept.
    pub fn sweep(
        &mut self,
        c: &Chain,
        validator: &Validator<'_>,
        votes: &VoteIndex,
    ) -> Vec<CandidateBlock> {
        let mut accepted = Vec::new();
        self.entries.retain(|digest, cand| {
            match validator.policy.evaluate(c, votes, digest) {
                PolicyVerdict::Voting => true,
                PolicyVerdict::Reject => false,
                PolicyVerdict::Accept => {
                    let opened = votes.first(digest).unwrap_or(usize::MAX);
                    accepted.push((cand.target_index, opened, *digest, cand.clone()));
                    false
                }
            }
        });
        accepted.sort_by_key(|(j, opened, digest, _)| (*j, *opened, *digest));
        accepted.dedup_by_key(|(j, ..)| *j);
        accepted.into_iter().map(|(.., cand)| cand).collect()
    }
}
