//! Canonical encodings, the two domain-separated hash functions and
//! difficulty-target arithmetic.
//!
//! Every hash input in the crate is an ordered list of byte strings. Each part
//! is written as an 8-byte little-endian length followed by the raw bytes, so
//! the encoding is injective. `H` and `G` are SHA-256 over that encoding with
//! distinct one-byte prefixes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Domain tag prepended to every `H` input.
pub const TAG_H: u8 = 0x48;
/// Domain tag prepended to every `G` input.
pub const TAG_G: u8 = 0x47;

#[derive(Debug, Error, PartialEq)]
pub enum HexError {
    #[error("invalid hex: {0}")]
    Invalid(#[from] hex::FromHexError),
    #[error("expected {expected} bytes, got {got}")]
    Length { expected: usize, got: usize },
    #[error("difficulty target must be non-zero")]
    ZeroTarget,
}

/// A 256-bit hash output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        let raw = hex::decode(s)?;
        Self::from_slice(&raw)
    }

    pub fn from_slice(raw: &[u8]) -> Result<Self, HexError> {
        let bytes: [u8; 32] = raw.try_into().map_err(|_| HexError::Length {
            expected: 32,
            got: raw.len(),
        })?;
        Ok(Digest(bytes))
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Digest {
    type Err = HexError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Digest::from_hex(s)
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Proof-of-work threshold: a digest qualifies iff its big-endian value is
/// strictly below the target.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DifficultyTarget([u8; 32]);

impl DifficultyTarget {
    /// 2^256 - 1, the easiest representable target.
    pub const MAX: DifficultyTarget = DifficultyTarget([0xff; 32]);

    pub fn from_be_bytes(bytes: [u8; 32]) -> Result<Self, HexError> {
        if bytes == [0u8; 32] {
            return Err(HexError::ZeroTarget);
        }
        Ok(DifficultyTarget(bytes))
    }

    /// The target `2^exp`. Panics unless `exp < 256`.
    pub fn pow2(exp: u32) -> Self {
        assert!(exp < 256, "2^{exp} does not fit in 256 bits");
        let mut bytes = [0u8; 32];
        let byte = 31 - (exp / 8) as usize;
        bytes[byte] = 1 << (exp % 8);
        DifficultyTarget(bytes)
    }

    /// The target `1`; no digest other than zero qualifies.
    pub fn one() -> Self {
        let mut bytes = [0u8; 32];
        bytes[31] = 1;
        DifficultyTarget(bytes)
    }

    /// Target whose success probability is about `p` (top 64 bits exact).
    /// Values of `p` at or above 1 give [`DifficultyTarget::MAX`].
    pub fn from_probability(p: f64) -> Self {
        if p >= 1.0 || p.is_nan() {
            return Self::MAX;
        }
        let top = (p.max(0.0) * 2f64.powi(64)) as u64;
        if top == 0 {
            return Self::one();
        }
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&top.to_be_bytes());
        DifficultyTarget(bytes)
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, HexError> {
        let raw = hex::decode(s)?;
        let bytes: [u8; 32] = raw.as_slice().try_into().map_err(|_| HexError::Length {
            expected: 32,
            got: raw.len(),
        })?;
        Self::from_be_bytes(bytes)
    }

    /// Approximate probability that a uniform digest meets this target.
    pub fn success_probability(&self) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, b)| f64::from(*b) * 2f64.powi(-8 * (i as i32 + 1)))
            .sum()
    }
}

impl fmt::Debug for DifficultyTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DifficultyTarget({})", self.to_hex())
    }
}

impl Serialize for DifficultyTarget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for DifficultyTarget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        DifficultyTarget::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Length-prefixed concatenation of `parts` in order.
pub fn encode_fields<P: AsRef<[u8]>>(parts: &[P]) -> Vec<u8> {
    let total: usize = parts.iter().map(|p| 8 + p.as_ref().len()).sum();
    let mut out = Vec::with_capacity(total);
    for p in parts {
        let p = p.as_ref();
        out.extend_from_slice(&(p.len() as u64).to_le_bytes());
        out.extend_from_slice(p);
    }
    out
}

fn tagged_hash(tag: u8, parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update([tag]);
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p);
    }
    Digest(hasher.finalize().into())
}

/// `H`: links blocks and derives identifiers.
pub fn hash_h(parts: &[&[u8]]) -> Digest {
    debug_assert!(!parts.is_empty(), "hash input must have at least one part");
    tagged_hash(TAG_H, parts)
}

/// `G`: digests block data.
pub fn hash_g(parts: &[&[u8]]) -> Digest {
    debug_assert!(!parts.is_empty(), "hash input must have at least one part");
    tagged_hash(TAG_G, parts)
}

pub fn meets_target(d: &Digest, target: &DifficultyTarget) -> bool {
    d.0 < target.0
}
