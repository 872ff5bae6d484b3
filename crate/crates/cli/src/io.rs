//! File formats shared by the subcommands.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use redact_core::chain::{read_chain, write_chain, Chain, ChainHeader, Mode};
use redact_core::ledger::{dump_mode, read_ledger_chain, write_ledger_chain, LedgerChain, LEDGER_MODE};
use redact_core::redaction::CandidateWire;
use serde::Serialize;

use crate::CliError;

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn is_ledger_dump(path: &Path) -> Result<bool, CliError> {
    Ok(dump_mode(open(path)?)? == LEDGER_MODE)
}

pub fn load_chain(path: &Path) -> Result<(Chain, ChainHeader), CliError> {
    if is_ledger_dump(path)? {
        return Err(CliError::Usage(format!(
            "{} is a ledger dump; this command works on single or ext chains",
            path.display()
        )));
    }
    read_chain(open(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn save_chain(path: &Path, c: &Chain, mode: Mode) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_chain(&mut w, c, mode)?;
    w.flush()?;
    Ok(())
}

pub fn load_ledger(path: &Path) -> Result<LedgerChain, CliError> {
    read_ledger_chain(open(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn save_ledger(path: &Path, c: &LedgerChain) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_ledger_chain(&mut w, c)?;
    w.flush()?;
    Ok(())
}

/// Candidate pool file: one wire candidate per line. A missing file is an
/// empty pool.
pub fn load_pool(path: &Path) -> Result<Vec<CandidateWire>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let w = serde_json::from_str(&line)
            .map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(w);
    }
    Ok(out)
}

pub fn save_pool(path: &Path, wires: &[CandidateWire]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for wire in wires {
        serde_json::to_writer(&mut w, wire)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON to `path`, or to standard output.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn writer(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

/// Entries given as text (`--entry`) or hex (`--entry-hex`).
pub fn entries(text: &[String], hex_entries: &[String]) -> Result<Vec<Vec<u8>>, CliError> {
    let mut out: Vec<Vec<u8>> = text.iter().map(|s| s.as_bytes().to_vec()).collect();
    for h in hex_entries {
        out.push(hex::decode(h).map_err(|e| CliError::Usage(format!("--entry-hex {h}: {e}")))?);
    }
    Ok(out)
}
