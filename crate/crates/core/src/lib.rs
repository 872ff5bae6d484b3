//! A proof-of-work chain whose blocks can be redacted after an on-chain vote.
//!
//! Each block keeps a digest of its original data, so links and proof of work
//! stay checkable after the data is replaced. A replacement is only valid if
//! enough blocks in a fixed window carry a vote for it.

pub mod bench;
pub mod chain;
pub mod config;
pub mod hashcore;
pub mod ledger;
pub mod netsim;
pub mod node;
pub mod redaction;
