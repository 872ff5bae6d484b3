//! `redact`: create, extend, edit, validate and benchmark redactable chains,
//! and run network simulations.

mod bench_cmd;
mod chain_cmd;
mod io;
mod sim_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use redact_core::config::{ChainKind, Config};
use redact_core::hashcore::DifficultyTarget;
use redact_core::redaction::{PolicyParams, Ratio};

/// Exit status 1: the input was well formed but failed validation.
pub const EXIT_INVALID: u8 = 1;
/// Exit status 2: bad arguments, unreadable files or other usage errors.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
}

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "redact", version, about = "Redactable proof-of-work chain tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Policy and chain parameters; flags override the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Key-value config file (k, ell, rho, difficulty_hex, min_edit_fee, mode).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub ell: Option<usize>,
    /// Threshold as a decimal ("0.6") or fraction ("3/5").
    #[arg(long)]
    pub rho: Option<Ratio>,
    #[arg(long)]
    pub difficulty_hex: Option<String>,
    #[arg(long)]
    pub min_edit_fee: Option<u64>,
    #[arg(long)]
    pub mode: Option<ChainKind>,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<Config, CliError> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let k = self.k.unwrap_or(c.policy.k);
        let ell = self.ell.unwrap_or(c.policy.ell);
        let rho = self.rho.unwrap_or(c.policy.rho);
        c.policy = PolicyParams::new(k, ell, rho)?;
        if let Some(h) = &self.difficulty_hex {
            c.difficulty = DifficultyTarget::from_hex(h)?;
        }
        if let Some(f) = self.min_edit_fee {
            c.min_edit_fee = f;
        }
        if let Some(m) = self.mode {
            c.mode = m;
        }
        Ok(c)
    }

    /// True if the mode was given explicitly, by flag or config file.
    pub fn mode_given(&self) -> bool {
        self.mode.is_some() || self.config.is_some()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a config file and a chain holding only the genesis block.
    Init(chain_cmd::InitArgs),
    /// Extend a chain: apply accepted edits, vote, and mine new blocks.
    Mine(chain_cmd::MineArgs),
    /// Propose replacing a stable block's entries; adds it to the pool file.
    ProposeEdit(chain_cmd::ProposeArgs),
    /// Show the voting state of every pooled candidate.
    VoteStatus(chain_cmd::StatusArgs),
    /// Apply every pooled candidate the policy accepts.
    ApplyEdit(chain_cmd::StatusArgs),
    /// Validate a chain dump (exit 1 with the offending height if invalid).
    Validate(chain_cmd::ValidateArgs),
    /// Print a readable summary of a chain dump.
    Dump(chain_cmd::DumpArgs),
    /// Check that bytes are the transaction removed from a redacted slot.
    VerifyClaim(chain_cmd::ClaimArgs),
    /// Generate a deterministic chain dump.
    Generate(bench_cmd::GenerateArgs),
    /// Time chain validation and write a CSV report.
    Bench(bench_cmd::BenchArgs),
    /// Run a network simulation and the property checkers.
    Simulate(sim_cmd::SimulateArgs),
    /// Run one of the scripted attack scenarios.
    Attack(sim_cmd::AttackArgs),
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Init(a) => chain_cmd::init(a),
        Command::Mine(a) => chain_cmd::mine(a),
        Command::ProposeEdit(a) => chain_cmd::propose(a),
        Command::VoteStatus(a) => chain_cmd::status(a),
        Command::ApplyEdit(a) => chain_cmd::apply(a),
        Command::Validate(a) => chain_cmd::validate(a),
        Command::Dump(a) => chain_cmd::dump(a),
        Command::VerifyClaim(a) => chain_cmd::verify_claim(a),
        Command::Generate(a) => bench_cmd::generate(a),
        Command::Bench(a) => bench_cmd::bench(a),
        Command::Simulate(a) => sim_cmd::simulate(a),
        Command::Attack(a) => sim_cmd::attack(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
