//! Chain generation and validation timing.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use redact_core::bench::{
    bench_validate, experiment_ell, experiment_no_redactions, experiment_redactions, generate_chain, write_csv,
    BenchCase, BenchResult, BenchSpec, Validation, Workload,
};
use redact_core::chain::{random_chain, Mode};
use redact_core::hashcore::DifficultyTarget;
use redact_core::redaction::Ratio;

use crate::io;
use crate::{CliError, CliResult};

/// Redaction fractions of the redaction-count experiment.
const FRACTIONS: [f64; 5] = [0.02, 0.04, 0.06, 0.08, 0.10];
/// Voting periods of the voting-period experiment.
const ELLS: [usize; 4] = [5, 10, 20, 40];
/// Redaction fraction used while varying the voting period.
const ELL_FRACTION: f64 = 0.01;

#[derive(Args, Clone)]
pub struct SpecArgs {
    #[arg(long, default_value_t = 2000)]
    blocks: usize,
    /// Transactions per block, coinbase included.
    #[arg(long, default_value_t = 100)]
    tx: usize,
    /// Fraction of blocks that get a redaction.
    #[arg(long, default_value_t = 0.0)]
    redact: f64,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    ell: usize,
    /// Vote threshold; defaults to a simple majority of ell.
    #[arg(long)]
    rho: Option<Ratio>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SpecArgs {
    fn spec(&self, reps: usize, check_signatures: bool) -> Result<BenchSpec, CliError> {
        let spec = BenchSpec {
            n_blocks: self.blocks,
            tx_per_block: self.tx,
            redaction_fraction: self.redact,
            k: self.k,
            ell: self.ell,
            rho: self.rho,
            repetitions: reps,
            seed: self.seed,
            mode: Validation::Redactable,
            check_signatures,
        };
        spec.check()?;
        Ok(spec)
    }
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    out: PathBuf,
    /// Write a chain of random entries (single mode, no votes) instead of a ledger.
    #[arg(long)]
    random: bool,
    /// Upper bound on entries per block for `--random`.
    #[arg(long, default_value_t = 8)]
    max_entries: usize,
}

pub fn generate(a: GenerateArgs) -> CliResult {
    if a.random {
        let c = random_chain(a.spec.blocks, a.max_entries, &DifficultyTarget::MAX, a.spec.seed);
        return io::save_chain(&a.out, &c, Mode::Single);
    }
    let spec = a.spec.spec(1, false)?;
    let work = Workload::new(spec.n_blocks, spec.tx_per_block, spec.seed);
    let c = generate_chain(&spec, &work)?;
    io::save_ledger(&a.out, &c)?;
    eprintln!("wrote {} ({} redactions)", a.out.display(), spec.redactions());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Immutable and redactable validation of the unredacted chain, plus the
    /// chain with `--redact` if it is non-zero.
    Single,
    /// Redactable against immutable validation, no redactions.
    A,
    /// Overhead against the number of redactions.
    B,
    /// Overhead against the voting period.
    C,
    All,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, value_enum, default_value_t = Experiment::Single)]
    experiment: Experiment,
    /// Verify every signature during validation.
    #[arg(long)]
    check_sigs: bool,
    /// Time these ledger dumps instead of generating chains. Repeatable.
    #[arg(long)]
    chain: Vec<PathBuf>,
    /// Dump to report overheads against (with `--chain`).
    #[arg(long, requires = "chain")]
    baseline: Option<PathBuf>,
    /// Time the baseline dump with the immutable validator.
    #[arg(long, requires = "baseline")]
    baseline_immutable: bool,
    /// CSV output; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn bench(a: BenchArgs) -> CliResult {
    let spec = a.spec.spec(a.reps, a.check_sigs)?;
    let results = if a.chain.is_empty() {
        generated(&a, &spec)?
    } else {
        from_dumps(&a, &spec)?
    };
    for r in &results {
        let overhead = r
            .overhead_pct
            .map(|o| format!("{o:+.2}% vs {}", r.baseline_name.as_deref().unwrap_or("?")))
            .unwrap_or_default();
        eprintln!("{:<20} {:>10.3} ms  ± {:>8.3}  {}", r.name, r.mean_ms, r.stddev_ms, overhead);
    }
    let mut w = io::writer(a.out.as_deref())?;
    write_csv(&mut w, &results)?;
    w.flush()?;
    Ok(())
}

fn generated(a: &BenchArgs, spec: &BenchSpec) -> Result<Vec<BenchResult>, CliError> {
    let work = Workload::new(spec.n_blocks, spec.tx_per_block, spec.seed);
    let mut out = Vec::new();
    let run_a = matches!(a.experiment, Experiment::A | Experiment::All);
    let run_b = matches!(a.experiment, Experiment::B | Experiment::All);
    let run_c = matches!(a.experiment, Experiment::C | Experiment::All);
    if a.experiment == Experiment::Single {
        let plain = BenchSpec { redaction_fraction: 0.0, ..*spec };
        let chain = generate_chain(&plain, &work)?;
        let mut cases = vec![
            BenchCase { name: "immutable".into(), spec: BenchSpec { mode: Validation::Immutable, ..plain }, chain: chain.clone() },
            BenchCase { name: "redactable-0".into(), spec: plain, chain },
        ];
        if spec.redaction_fraction > 0.0 {
            cases.push(BenchCase { name: spec.label(), spec: *spec, chain: generate_chain(spec, &work)? });
        }
        let mut results = bench_validate(&cases, spec.repetitions)?;
        let baseline = results[0].clone();
        for r in results.iter_mut().skip(1) {
            r.set_baseline(&baseline);
        }
        out.extend(results);
    }
    if run_a {
        out.extend(experiment_no_redactions(spec, &work)?);
    }
    if run_b {
        out.extend(experiment_redactions(spec, &FRACTIONS, &work)?);
    }
    if run_c {
        let base = BenchSpec { redaction_fraction: ELL_FRACTION, ..*spec };
        out.extend(experiment_ell(&base, &ELLS, &work)?);
    }
    Ok(out)
}

fn from_dumps(a: &BenchArgs, spec: &BenchSpec) -> Result<Vec<BenchResult>, CliError> {
    let mut cases = Vec::new();
    let case = |path: &PathBuf, mode: Validation| -> Result<BenchCase, CliError> {
        let chain = io::load_ledger(path)?;
        let tx = chain.blocks.iter().map(|b| b.txs.len()).max().unwrap_or(0);
        let spec = BenchSpec { n_blocks: chain.len(), tx_per_block: tx, mode, ..*spec };
        Ok(BenchCase { name: path.display().to_string(), spec, chain })
    };
    if let Some(b) = &a.baseline {
        let mode = if a.baseline_immutable { Validation::Immutable } else { Validation::Redactable };
        cases.push(case(b, mode)?);
    }
    for p in &a.chain {
        cases.push(case(p, Validation::Redactable)?);
    }
    let mut results = bench_validate(&cases, spec.repetitions)
        .map_err(|f| CliError::Invalid(format!("invalid: {f}")))?;
    if a.baseline.is_some() {
        let baseline = results[0].clone();
        for r in results.iter_mut().skip(1) {
            r.set_baseline(&baseline);
        }
    }
    Ok(results)
}
