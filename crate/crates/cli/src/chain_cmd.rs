//! Subcommands that read and write a single chain dump.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use redact_core::chain::{default_genesis, BlockPayload, Chain, ChainHeader, Mode, Structural, Validator};
use redact_core::config::ChainKind;
use redact_core::ledger::{
    signing_key, validate_ledger_chain, verify_victim_claim, LedgerBuilder, LedgerOptions, TxOutput, SUBSIDY,
};
use redact_core::node::{EndorsementRule, Message, NodeConfig, NodeEvent, NodeState, RoundInput};
use redact_core::redaction::{evaluate_policy, CandidateWire, VoteIndex};
use serde::Serialize;

use crate::io;
use crate::{CliError, CliResult, ParamArgs};

#[derive(Args)]
pub struct InitArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Chain dump to create.
    #[arg(long)]
    chain: PathBuf,
    /// Also write the resolved parameters to this config file.
    #[arg(long)]
    config_out: Option<PathBuf>,
    /// Seed of the ledger genesis key.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn init(a: InitArgs) -> CliResult {
    let cfg = a.params.resolve()?;
    if let Some(p) = &a.config_out {
        std::fs::write(p, cfg.to_toml()?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
    }
    match cfg.mode {
        ChainKind::Ledger => {
            let key = signing_key(a.seed);
            let outputs = vec![TxOutput::pay(&key.verifying_key(), SUBSIDY)];
            let b = LedgerBuilder::new(outputs, cfg.difficulty, cfg.ledger_params(), a.seed);
            io::save_ledger(&a.chain, b.chain())?;
        }
        kind => {
            let c = Chain::new(default_genesis(), cfg.difficulty);
            io::save_chain(&a.chain, &c, chain_mode(kind))?;
        }
    }
    println!("wrote {}", a.chain.display());
    Ok(())
}

fn chain_mode(kind: ChainKind) -> Mode {
    match kind {
        ChainKind::Ext => Mode::Ext,
        _ => Mode::Single,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VoteRule {
    /// Vote for candidates that only remove entries.
    Honest,
    /// Vote for every pooled candidate.
    All,
    None,
}

#[derive(Args)]
pub struct MineArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    chain: PathBuf,
    /// Candidate pool file (JSON Lines); created if missing.
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Entry to include, as UTF-8 text. Repeatable.
    #[arg(long)]
    entry: Vec<String>,
    /// Entry to include, as hex. Repeatable.
    #[arg(long)]
    entry_hex: Vec<String>,
    /// Number of blocks to mine.
    #[arg(long, default_value_t = 1)]
    blocks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Which pooled candidates receive this miner's votes.
    #[arg(long, value_enum, default_value_t = VoteRule::Honest)]
    vote: VoteRule,
}

/// A node holding the loaded chain, ready to take the pool as messages.
struct Session {
    node: NodeState,
    header: ChainHeader,
    wires: Vec<CandidateWire>,
}

impl Session {
    fn open(params: &ParamArgs, chain: &Path, pool: Option<&Path>) -> Result<Self, CliError> {
        let cfg = params.resolve()?;
        let (c, header) = io::load_chain(chain)?;
        let genesis = c.genesis().cloned().ok_or_else(|| CliError::Invalid("chain is empty".into()))?;
        let config = NodeConfig {
            mode: header.mode,
            params: cfg.policy,
            data: Default::default(),
            genesis,
            difficulty: *c.difficulty(),
            max_entries_per_block: 1024,
        };
        let mut node = NodeState::new(0, Arc::new(config), 0);
        if let Err(f) = node.validator().check_chain(&c) {
            return Err(CliError::Invalid(format!("invalid chain: {f}")));
        }
        node.chain = Arc::new(c);
        let wires = match pool {
            Some(p) => io::load_pool(p)?,
            None => Vec::new(),
        };
        Ok(Session { node, header, wires })
    }

    fn round(&mut self, environment: Vec<Vec<u8>>, q: u64, seed: u64) -> Vec<NodeEvent> {
        let messages = std::mem::take(&mut self.wires).into_iter().map(Message::Candidate).collect();
        self.node.step_round(RoundInput { messages, environment }, q, seed).events
    }

    fn save(&self, chain: &Path, pool: Option<&Path>) -> CliResult {
        io::save_chain(chain, &self.node.chain, self.header.mode)?;
        if let Some(p) = pool {
            let wires: Vec<CandidateWire> = self.node.pool.iter().map(|(_, c)| CandidateWire::from_candidate(c)).collect();
            io::save_pool(p, &wires)?;
        }
        Ok(())
    }
}

fn print_events(events: &[NodeEvent]) -> CliResult {
    for e in events {
        println!("{}", serde_json::to_string(e)?);
    }
    Ok(())
}

pub fn mine(a: MineArgs) -> CliResult {
    let pool = a.pool.as_deref();
    let mut s = Session::open(&a.params, &a.chain, pool)?;
    let mut environment = io::entries(&a.entry, &a.entry_hex)?;
    s.node.endorsement = match a.vote {
        VoteRule::Honest => EndorsementRule::Honest,
        VoteRule::None | VoteRule::All => EndorsementRule::Never,
    };
    for i in 0..a.blocks {
        if a.vote == VoteRule::All {
            // Pool the incoming candidates first so that all of them get votes.
            let events = s.round(std::mem::take(&mut environment), 0, 0);
            print_events(&events)?;
            let all = s.node.pool.iter().map(|(d, _)| *d).collect();
            s.node.endorsement = EndorsementRule::Only(all);
        }
        let seed = a.seed.wrapping_add(i as u64);
        let events = s.round(std::mem::take(&mut environment), u64::MAX, seed);
        print_events(&events)?;
        if !events.iter().any(|e| matches!(e, NodeEvent::Mined { .. })) {
            return Err(CliError::Invalid("mined block failed validation".into()));
        }
    }
    s.save(&a.chain, pool)
}

#[derive(Args)]
pub struct ProposeArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    /// Height of the block to edit (genesis is 1).
    #[arg(long)]
    index: usize,
    /// Position of an entry to remove. Repeatable.
    #[arg(long, conflicts_with_all = ["entry", "entry_hex"])]
    drop: Vec<usize>,
    /// Replacement entry as text. Repeatable; replaces all entries.
    #[arg(long)]
    entry: Vec<String>,
    /// Replacement entry as hex. Repeatable.
    #[arg(long)]
    entry_hex: Vec<String>,
}

pub fn propose(a: ProposeArgs) -> CliResult {
    let mut s = Session::open(&a.params, &a.chain, Some(&a.pool))?;
    let original = s
        .node
        .chain
        .get(a.index)
        .ok_or_else(|| CliError::Usage(format!("no block at height {}", a.index)))?
        .payload
        .clone();
    let entries = if !a.drop.is_empty() {
        if let Some(&bad) = a.drop.iter().find(|&&i| i >= original.entries.len()) {
            return Err(CliError::Usage(format!("block {} has no entry {bad}", a.index)));
        }
        let drop: BTreeSet<usize> = a.drop.iter().copied().collect();
        original
            .entries
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, e)| e.clone())
            .collect()
    } else {
        io::entries(&a.entry, &a.entry_hex)?
    };
    let payload = BlockPayload::new(entries, original.votes.clone());
    let msg = s
        .node
        .submit_edit_proposal(a.index, payload)
        .map_err(|e| CliError::Invalid(format!("proposal rejected: {e}")))?;
    let Message::Candidate(wire) = msg else {
        unreachable!("a proposal yields a candidate message");
    };
    let mut wires = s.wires;
    if !wires.contains(&wire) {
        wires.push(wire.clone());
    }
    io::save_pool(&a.pool, &wires)?;
    println!("{}", wire.declared_digest_hex);
    Ok(())
}

#[derive(Args)]
pub struct StatusArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    pool: PathBuf,
}

#[derive(Serialize)]
struct CandidateStatus {
    digest: String,
    target: usize,
    vote_heights: Vec<usize>,
    threshold: usize,
    window: Option<(usize, usize)>,
    verdict: String,
}

pub fn status(a: StatusArgs) -> CliResult {
    let cfg = a.params.resolve()?;
    let (c, header) = io::load_chain(&a.chain)?;
    let votes = VoteIndex::build(&c);
    for w in io::load_pool(&a.pool)? {
        let line = match w.to_candidate(&c, header.mode) {
            Ok(cand) => {
                let d = cand.digest();
                let heights = votes.heights(&d).to_vec();
                CandidateStatus {
                    digest: d.to_hex(),
                    target: cand.target_index,
                    threshold: cfg.policy.threshold(),
                    window: heights.first().map(|&r| (r, r + cfg.policy.ell - 1)),
                    vote_heights: heights,
                    verdict: evaluate_policy(&c, &cand, &cfg.policy).to_string(),
                }
            }
            Err(e) => CandidateStatus {
                digest: w.declared_digest_hex.clone(),
                target: w.target_index,
                vote_heights: Vec::new(),
                threshold: cfg.policy.threshold(),
                window: None,
                verdict: format!("unusable: {e}"),
            },
        };
        println!("{}", serde_json::to_string(&line)?);
    }
    Ok(())
}

pub fn apply(a: StatusArgs) -> CliResult {
    let mut s = Session::open(&a.params, &a.chain, Some(&a.pool))?;
    let events = s.round(Vec::new(), 0, 0);
    print_events(&events)?;
    s.save(&a.chain, Some(&a.pool))
}

#[derive(Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    chain: PathBuf,
    /// Verify transaction signatures (ledger dumps only).
    #[arg(long)]
    check_sigs: bool,
}

pub fn validate(a: ValidateArgs) -> CliResult {
    let cfg = a.params.resolve()?;
    if io::is_ledger_dump(&a.chain)? {
        let c = io::load_ledger(&a.chain)?;
        let opts = if a.check_sigs { LedgerOptions::full() } else { LedgerOptions::assume_valid() };
        let report = validate_ledger_chain(&c, &cfg.ledger_params(), opts)
            .map_err(|f| CliError::Invalid(format!("invalid: {f}")))?;
        println!(
            "valid: {} blocks, {} transactions, {} redacted",
            report.blocks, report.transactions, report.redacted_slots
        );
        return Ok(());
    }
    let (c, header) = io::load_chain(&a.chain)?;
    let mode = match a.params.mode {
        Some(ChainKind::Ledger) => return Err(CliError::Usage("dump is not a ledger chain".into())),
        Some(kind) => chain_mode(kind),
        None => header.mode,
    };
    Validator::new(mode, &cfg.policy, &Structural)
        .check_chain(&c)
        .map_err(|f| CliError::Invalid(format!("invalid: {f}")))?;
    let redacted = c.blocks().iter().filter(|b| !b.is_unredacted()).count();
    println!("valid: {} blocks, {} redacted", c.len(), redacted);
    Ok(())
}

#[derive(Args)]
pub struct DumpArgs {
    #[arg(long)]
    chain: PathBuf,
}

pub fn dump(a: DumpArgs) -> CliResult {
    if io::is_ledger_dump(&a.chain)? {
        let c = io::load_ledger(&a.chain)?;
        println!("{:>6}  {:<64}  {:>5}  redacted", "height", "id", "txs");
        for (i, b) in c.blocks.iter().enumerate() {
            let redacted: Vec<String> = b
                .txs
                .slots
                .iter()
                .enumerate()
                .filter(|(_, s)| s.old_txid.is_some())
                .map(|(j, _)| j.to_string())
                .collect();
            println!("{:>6}  {}  {:>5}  {}", i + 1, b.header.id(), b.txs.len(), redacted.join(","));
        }
        return Ok(());
    }
    let (c, header) = io::load_chain(&a.chain)?;
    println!("mode {:?}, difficulty {}", header.mode, header.difficulty_hex);
    println!("{:>6}  {:<64}  {:>7}  {:>5}  redacted", "height", "link", "entries", "votes");
    for (i, b) in c.blocks().iter().enumerate() {
        let edits = if b.is_unredacted() { "no" } else { "yes" };
        println!(
            "{:>6}  {}  {:>7}  {:>5}  {}",
            i + 1,
            b.link_digest(),
            b.payload.entries.len(),
            b.payload.votes.len(),
            edits
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct ClaimArgs {
    /// Ledger chain dump.
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    tx_index: usize,
    /// Serialized transaction, as hex.
    #[arg(long, conflicts_with = "claim_file", required_unless_present = "claim_file")]
    claim_hex: Option<String>,
    /// File holding the serialized transaction.
    #[arg(long)]
    claim_file: Option<PathBuf>,
}

pub fn verify_claim(a: ClaimArgs) -> CliResult {
    let c = io::load_ledger(&a.chain)?;
    let claimed = match (&a.claim_hex, &a.claim_file) {
        (Some(h), _) => hex::decode(h.trim()).map_err(|e| CliError::Usage(format!("--claim-hex: {e}")))?,
        (None, Some(p)) => std::fs::read(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    match verify_victim_claim(&claimed, (a.height, a.tx_index), &c) {
        Ok(true) => {
            println!("claim verified");
            Ok(())
        }
        Ok(false) => Err(CliError::Invalid("claim rejected: transaction id does not match".into())),
        Err(e) => Err(CliError::Invalid(format!("claim rejected: {e}"))),
    }
}
