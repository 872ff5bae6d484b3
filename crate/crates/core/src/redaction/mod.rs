//! Candidate blocks, the `(k, l, rho)` voting policy and the candidate pool.

mod pool;
mod wire;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::chain::{data_digest, Block, BlockPayload, Chain, Mode, PayloadRules, Validator};
use crate::hashcore::Digest;

pub use pool::CandidatePool;
pub use wire::{CandidateWire, WireError};

/// Exact positive rational in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: u64,
    den: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RatioError {
    #[error("ratio must lie in (0, 1], got {0}/{1}")]
    OutOfRange(u64, u64),
    #[error("cannot parse ratio `{0}`")]
    Parse(String),
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self, RatioError> {
        if num == 0 || den == 0 || num > den {
            return Err(RatioError::OutOfRange(num, den));
        }
        let g = gcd(num, den);
        Ok(Ratio {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    /// `ceil(self * n)`.
    pub fn ceil_mul(&self, n: u64) -> u64 {
        (n * self.num).div_ceil(self.den)
    }

    /// The simple-majority ratio `(floor(l/2) + 1) / l`.
    pub fn majority(ell: u64) -> Self {
        Ratio::new(ell / 2 + 1, ell).expect("ell >= 1")
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Ratio {
    type Err = RatioError;

    /// Accepts `a/b` or a decimal such as `0.6`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RatioError::Parse(s.to_string());
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let a = a.trim().parse().map_err(|_| bad())?;
            let b = b.trim().parse().map_err(|_| bad())?;
            return Ratio::new(a, b);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let frac_val: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        Ratio::new(num, den)
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("voting period must be at least 1")]
    ZeroEll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyParams {
    pub k: usize,
    pub ell: usize,
    pub rho: Ratio,
}

impl PolicyParams {
    pub fn new(k: usize, ell: usize, rho: Ratio) -> Result<Self, ParamsError> {
        if k == 0 {
            return Err(ParamsError::ZeroK);
        }
        if ell == 0 {
            return Err(ParamsError::ZeroEll);
        }
        Ok(PolicyParams { k, ell, rho })
    }

    /// Votes required for approval: `ceil(rho * l)`.
    pub fn threshold(&self) -> usize {
        self.rho.ceil_mul(self.ell as u64) as usize
    }

    /// Verdict for a window opening at height `r` on a chain of length `n`,
    /// given the sorted heights that carry the vote.
    pub fn verdict_for(&self, n: usize, heights: &[usize]) -> PolicyVerdict {
        let Some(&r) = heights.first() else {
            return PolicyVerdict::Voting;
        };
        let close = r + self.ell - 1;
        if close + self.k > n {
            return PolicyVerdict::Voting;
        }
        let count = heights.partition_point(|&h| h <= close);
        if count >= self.threshold() {
            PolicyVerdict::Accept
        } else {
            PolicyVerdict::Reject
        }
    }

    /// Height at which the voting window for `token` closes, if opened.
    pub fn window_close(&self, votes: &VoteIndex, token: &Digest) -> Option<usize> {
        votes.first(token).map(|r| r + self.ell - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyVerdict {
    Accept,
    Reject,
    Voting,
}

impl fmt::Display for PolicyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyVerdict::Accept => "accept",
            PolicyVerdict::Reject => "reject",
            PolicyVerdict::Voting => "voting",
        })
    }
}

/// Token to the sorted, de-duplicated heights of blocks carrying it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VoteIndex {
    heights: HashMap<Digest, Vec<usize>>,
}

impl VoteIndex {
    pub fn build(c: &Chain) -> Self {
        let mut heights: HashMap<Digest, Vec<usize>> = HashMap::new();
        for (i, b) in c.blocks().iter().enumerate() {
            for v in &b.payload.votes {
                let hs = heights.entry(*v).or_default();
                if hs.last() != Some(&(i + 1)) {
                    hs.push(i + 1);
                }
            }
        }
        VoteIndex { heights }
    }

    pub fn heights(&self, token: &Digest) -> &[usize] {
        self.heights.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn first(&self, token: &Digest) -> Option<usize> {
        self.heights(token).first().copied()
    }
}

/// Decides whether a redaction identified by its vote token is approved on a
/// chain.
pub trait PolicyEvaluator: Sync {
    fn evaluate(&self, chain: &Chain, votes: &VoteIndex, token: &Digest) -> PolicyVerdict;
}

impl PolicyEvaluator for PolicyParams {
    fn evaluate(&self, chain: &Chain, votes: &VoteIndex, token: &Digest) -> PolicyVerdict {
        self.verdict_for(chain.len(), votes.heights(token))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateBlock {
    pub target_index: usize,
    pub block: Block,
}

impl CandidateBlock {
    /// `H(ctr, G(s, x*), y*)`: pool key and on-chain vote token.
    pub fn digest(&self) -> Digest {
        self.block.link_digest()
    }
}

pub fn candidate_digest(cand: &CandidateBlock) -> Digest {
    cand.digest()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProposeError {
    #[error("block index {0} is outside the chain")]
    IndexOutOfRange(usize),
    #[error("the genesis block cannot be edited")]
    GenesisImmutable,
    #[error("block {index} is not {k} blocks deep in a chain of length {len}")]
    TargetNotStable { index: usize, k: usize, len: usize },
    #[error("candidate payload alters the original votes")]
    VotesTampered,
    #[error("candidate payload equals the current payload")]
    NoOpEdit,
}

/// Builds the candidate replacing block `j` of `c` with `payload`.
pub fn propose_edit(
    c: &Chain,
    j: usize,
    payload: BlockPayload,
    k: usize,
    mode: Mode,
) -> Result<CandidateBlock, ProposeError> {
    let n = c.len();
    if j == 0 || j > n {
        return Err(ProposeError::IndexOutOfRange(j));
    }
    if j == 1 {
        return Err(ProposeError::GenesisImmutable);
    }
    if j + k > n {
        return Err(ProposeError::TargetNotStable { index: j, k, len: n });
    }
    let original = c.get(j).expect("range checked");
    if payload.votes != original.payload.votes {
        return Err(ProposeError::VotesTampered);
    }
    if payload == original.payload {
        return Err(ProposeError::NoOpEdit);
    }
    Ok(candidate_for(original, j, payload, mode))
}

/// The candidate for `original` at height `j` carrying `payload`, without
/// any precondition checks.
pub fn candidate_for(original: &Block, j: usize, payload: BlockPayload, mode: Mode) -> CandidateBlock {
    let y = match mode {
        Mode::Single => original.y.clone(),
        Mode::Ext => {
            let current = data_digest(&original.s, &original.payload);
            if current == *original.y.last() {
                original.y.clone()
            } else {
                original.y.appended(current)
            }
        }
    };
    CandidateBlock {
        target_index: j,
        block: Block {
            s: original.s,
            payload,
            ctr: original.ctr,
            y,
        },
    }
}

/// Single-mode candidate check against the neighbours in `c`.
pub fn validate_cand(c: &Chain, cand: &CandidateBlock, rules: &dyn PayloadRules) -> bool {
    let unused = PolicyParams::new(1, 1, Ratio::new(1, 1).unwrap()).unwrap();
    Validator::new(Mode::Single, &unused, rules)
        .check_candidate(c, cand.target_index, &cand.block, &VoteIndex::default())
        .is_ok()
}

/// Extension-mode candidate check, including approval of every earlier
/// redaction recorded in the candidate's old state.
pub fn validate_cand_ext(
    c: &Chain,
    cand: &CandidateBlock,
    policy: &dyn PolicyEvaluator,
    rules: &dyn PayloadRules,
) -> bool {
    Validator::new(Mode::Ext, policy, rules)
        .check_candidate(c, cand.target_index, &cand.block, &VoteIndex::build(c))
        .is_ok()
}

pub fn evaluate_policy(c: &Chain, cand: &CandidateBlock, params: &PolicyParams) -> PolicyVerdict {
    let votes = VoteIndex::build(c);
    params.evaluate(c, &votes, &cand.digest())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("candidate is not accepted (policy: {0})")]
    PolicyNotAccepted(PolicyVerdict),
    #[error("candidate fails validation against the chain")]
    CandidateInvalid,
}

/// Replaces block `cand.target_index` with the candidate after checking it
/// is valid and approved on `c`.
pub fn apply_redaction(
    c: &Chain,
    cand: &CandidateBlock,
    validator: &Validator<'_>,
) -> Result<Chain, ApplyError> {
    let votes = VoteIndex::build(c);
    apply_redaction_indexed(c, cand, validator, &votes)
}

pub(crate) fn apply_redaction_indexed(
    c: &Chain,
    cand: &CandidateBlock,
    validator: &Validator<'_>,
    votes: &VoteIndex,
) -> Result<Chain, ApplyError> {
    validator
        .check_candidate(c, cand.target_index, &cand.block, votes)
        .map_err(|_| ApplyError::CandidateInvalid)?;
    let verdict = validator.policy.evaluate(c, votes, &cand.digest());
    if verdict != PolicyVerdict::Accept {
        return Err(ApplyError::PolicyNotAccepted(verdict));
    }
    let mut out = c.clone();
    out.replace(cand.target_index, cand.block.clone())
        .expect("index checked by candidate validation");
    Ok(out)
}
