//! Transactions, their canonical encoding and witness signatures.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashcore::{encode_fields, hash_h, Digest};

/// Largest payload a data output may carry.
pub const MAX_DATA_BYTES: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutPoint {
    pub txid: Digest,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TxInput {
    pub prev_txid: Digest,
    pub output_index: u32,
    pub witness: Vec<u8>,
}

impl TxInput {
    pub fn new(prev: OutPoint) -> Self {
        TxInput {
            prev_txid: prev.txid,
            output_index: prev.index,
            witness: Vec::new(),
        }
    }

    pub fn outpoint(&self) -> OutPoint {
        OutPoint {
            txid: self.prev_txid,
            index: self.output_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputKind {
    Spendable,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TxOutput {
    pub kind: OutputKind,
    pub amount: u64,
    /// Verification key for spendable outputs, raw payload for data outputs.
    pub script: Vec<u8>,
}

impl TxOutput {
    pub fn pay(key: &VerifyingKey, amount: u64) -> Self {
        TxOutput {
            kind: OutputKind::Spendable,
            amount,
            script: key.to_bytes().to_vec(),
        }
    }

    pub fn data(bytes: impl Into<Vec<u8>>) -> Self {
        TxOutput {
            kind: OutputKind::Data,
            amount: 0,
            script: bytes.into(),
        }
    }

    fn encode(&self) -> Vec<u8> {
        let kind = match self.kind {
            OutputKind::Spendable => [0u8],
            OutputKind::Data => [1u8],
        };
        encode_fields(&[&kind[..], &self.amount.to_le_bytes(), &self.script])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    pub is_coinbase: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated field")]
    Truncated,
    #[error("trailing bytes after last field")]
    Trailing,
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("field has the wrong width")]
    Width,
    #[error("unknown tag byte {0}")]
    Tag(u8),
}

/// Splits a canonical encoding back into its parts.
pub fn decode_fields(mut bytes: &[u8]) -> Result<Vec<&[u8]>, DecodeError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 8 {
            return Err(DecodeError::Truncated);
        }
        let (len, rest) = bytes.split_at(8);
        let len = u64::from_le_bytes(len.try_into().expect("8 bytes"));
        let len = usize::try_from(len).map_err(|_| DecodeError::Truncated)?;
        if rest.len() < len {
            return Err(DecodeError::Truncated);
        }
        let (field, rest) = rest.split_at(len);
        out.push(field);
        bytes = rest;
    }
    Ok(out)
}

fn exact<const N: usize>(bytes: &[u8]) -> Result<[u8; N], DecodeError> {
    bytes.try_into().map_err(|_| DecodeError::Width)
}

fn expect_fields(bytes: &[u8], n: usize) -> Result<Vec<&[u8]>, DecodeError> {
    let fields = decode_fields(bytes)?;
    if fields.len() != n {
        return Err(DecodeError::FieldCount {
            expected: n,
            found: fields.len(),
        });
    }
    Ok(fields)
}

impl Transaction {
    pub fn new(inputs: Vec<TxInput>, outputs: Vec<TxOutput>) -> Self {
        Transaction {
            inputs,
            outputs,
            is_coinbase: false,
        }
    }

    fn flag(&self) -> [u8; 1] {
        [u8::from(self.is_coinbase)]
    }

    fn outputs_bytes(&self) -> Vec<u8> {
        let outs: Vec<Vec<u8>> = self.outputs.iter().map(TxOutput::encode).collect();
        encode_fields(&outs)
    }

    fn inputs_bytes(&self, with_witness: bool) -> Vec<u8> {
        let ins: Vec<Vec<u8>> = self
            .inputs
            .iter()
            .map(|i| {
                let idx = i.output_index.to_le_bytes();
                if with_witness {
                    encode_fields(&[i.prev_txid.as_ref(), &idx[..], &i.witness])
                } else {
                    encode_fields(&[i.prev_txid.as_ref(), &idx[..]])
                }
            })
            .collect();
        encode_fields(&ins)
    }

    /// Identifier over the witness-stripped encoding.
    pub fn txid(&self) -> Digest {
        hash_h(&[&self.flag(), &self.inputs_bytes(false), &self.outputs_bytes()])
    }

    /// Full wire encoding, witnesses included.
    pub fn to_bytes(&self) -> Vec<u8> {
        encode_fields(&[&self.flag()[..], &self.inputs_bytes(true), &self.outputs_bytes()])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let top = expect_fields(bytes, 3)?;
        let is_coinbase = match top[0] {
            [0] => false,
            [1] => true,
            [t] => return Err(DecodeError::Tag(*t)),
            _ => return Err(DecodeError::Width),
        };
        let inputs = decode_fields(top[1])?
            .into_iter()
            .map(|raw| {
                let f = expect_fields(raw, 3)?;
                Ok(TxInput {
                    prev_txid: Digest(exact::<32>(f[0])?),
                    output_index: u32::from_le_bytes(exact::<4>(f[1])?),
                    witness: f[2].to_vec(),
                })
            })
            .collect::<Result<Vec<_>, DecodeError>>()?;
        let outputs = decode_fields(top[2])?
            .into_iter()
            .map(|raw| {
                let f = expect_fields(raw, 3)?;
                let kind = match f[0] {
                    [0] => OutputKind::Spendable,
                    [1] => OutputKind::Data,
                    [t] => return Err(DecodeError::Tag(*t)),
                    _ => return Err(DecodeError::Width),
                };
                Ok(TxOutput {
                    kind,
                    amount: u64::from_le_bytes(exact::<8>(f[1])?),
                    script: f[2].to_vec(),
                })
            })
            .collect::<Result<Vec<_>, DecodeError>>()?;
        Ok(Transaction {
            inputs,
            outputs,
            is_coinbase,
        })
    }

    pub fn output_total(&self) -> Option<u64> {
        self.outputs.iter().try_fold(0u64, |acc, o| acc.checked_add(o.amount))
    }

    pub fn data_outputs(&self) -> impl Iterator<Item = &TxOutput> {
        self.outputs.iter().filter(|o| o.kind == OutputKind::Data)
    }

    /// Fills every input's witness with a signature over the txid.
    pub fn sign_all(&mut self, key: &SigningKey) {
        let msg = self.txid();
        let sig = key.sign(msg.as_ref()).to_bytes().to_vec();
        for input in &mut self.inputs {
            input.witness = sig.clone();
        }
    }

    pub fn sign_input(&mut self, i: usize, key: &SigningKey) {
        let msg = self.txid();
        self.inputs[i].witness = key.sign(msg.as_ref()).to_bytes().to_vec();
    }
}

/// Checks a witness against the spent output's key and a signed txid.
pub fn verify_witness(script: &[u8], witness: &[u8], signed: &Digest) -> bool {
    let Ok(key_bytes) = <[u8; 32]>::try_from(script) else {
        return false;
    };
    let Ok(key) = VerifyingKey::from_bytes(&key_bytes) else {
        return false;
    };
    let Ok(sig) = Signature::from_slice(witness) else {
        return false;
    };
    key.verify(signed.as_ref(), &sig).is_ok()
}

/// Deterministic signing key for simulations and fixtures.
pub fn signing_key(seed: u64) -> SigningKey {
    let d = hash_h(&[b"signing-key", &seed.to_le_bytes()]);
    SigningKey::from_bytes(&d.0)
}
