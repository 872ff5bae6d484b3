//! Validation benchmarks on generated ledger chains: workload generation,
//! timing against a named baseline, CSV output and trend fits.

use std::io::Write;
use std::time::Instant;

use ed25519_dalek::SigningKey;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashcore::DifficultyTarget;
use crate::ledger::{
    build_edit_tx, signing_key, validate_ledger_chain, validate_ledger_chain_immutable, Funding, LedgerBuilder,
    LedgerChain, LedgerFault, LedgerOptions, LedgerParams, OutPoint, Transaction, TxInput, TxOutput,
};
use crate::redaction::{PolicyParams, Ratio};

/// Bytes of dummy data carried by every workload transaction.
pub const DUMMY_DATA_BYTES: usize = 4;
const LANE_AMOUNT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Validation {
    #[default]
    Redactable,
    Immutable,
}

impl Validation {
    pub fn as_str(self) -> &'static str {
        match self {
            Validation::Redactable => "redactable",
            Validation::Immutable => "immutable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub n_blocks: usize,
    /// Transactions per block, coinbase included.
    pub tx_per_block: usize,
    pub redaction_fraction: f64,
    pub k: usize,
    pub ell: usize,
    /// Defaults to the simple majority of `ell`.
    pub rho: Option<Ratio>,
    pub repetitions: usize,
    pub seed: u64,
    pub mode: Validation,
    pub check_signatures: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            n_blocks: 2000,
            tx_per_block: 100,
            redaction_fraction: 0.0,
            k: 6,
            ell: 5,
            rho: None,
            repetitions: 20,
            seed: 1,
            mode: Validation::Redactable,
            check_signatures: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecInvalid {
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("redaction fraction {0} is outside [0, 1]")]
    Fraction(f64),
    #[error("at least two blocks and two transactions per block are needed")]
    TooSmall,
    #[error("k and ell must be positive")]
    Policy,
    #[error("{wanted} redactions do not fit: only {room} blocks can be redacted and still be applied")]
    NoRoom { wanted: usize, room: usize },
}

impl BenchSpec {
    pub fn policy(&self) -> Result<PolicyParams, SpecInvalid> {
        let rho = self.rho.unwrap_or_else(|| Ratio::majority(self.ell.max(1) as u64));
        PolicyParams::new(self.k, self.ell, rho).map_err(|_| SpecInvalid::Policy)
    }

    pub fn params(&self) -> Result<LedgerParams, SpecInvalid> {
        Ok(LedgerParams::new(self.policy()?))
    }

    pub fn redactions(&self) -> usize {
        (self.redaction_fraction * self.n_blocks as f64).floor() as usize
    }

    /// Highest block that can be redacted: its edit sits `k` blocks later and
    /// must be accepted and applied before the chain ends.
    pub fn last_target(&self) -> usize {
        self.n_blocks.saturating_sub(3 * self.k + self.ell + 1)
    }

    pub fn options(&self) -> LedgerOptions {
        LedgerOptions { check_signatures: self.check_signatures }
    }

    pub fn check(&self) -> Result<(), SpecInvalid> {
        if self.repetitions == 0 {
            return Err(SpecInvalid::NoRepetitions);
        }
        if !(0.0..=1.0).contains(&self.redaction_fraction) {
            return Err(SpecInvalid::Fraction(self.redaction_fraction));
        }
        if self.n_blocks < 2 || self.tx_per_block < 2 {
            return Err(SpecInvalid::TooSmall);
        }
        self.policy()?;
        let room = self.last_target().saturating_sub(1);
        if self.redactions() > room {
            return Err(SpecInvalid::NoRoom { wanted: self.redactions(), room });
        }
        Ok(())
    }

    /// Short label used in CSV rows.
    pub fn label(&self) -> String {
        format!(
            "{}-f{}-l{}",
            self.mode.as_str(),
            self.redaction_fraction,
            self.ell
        )
    }
}

/// The redaction-independent part of a benchmark chain: signed transfer
/// transactions in lanes, one lane per non-coinbase slot. Shared across
/// configurations with the same size and seed.
pub struct Workload {
    pub n_blocks: usize,
    pub tx_per_block: usize,
    pub seed: u64,
    key: SigningKey,
    genesis_outputs: Vec<TxOutput>,
    /// `blocks[i]` holds the transfers of height `i + 2`.
    blocks: Vec<Vec<Transaction>>,
}

impl Workload {
    pub fn new(n_blocks: usize, tx_per_block: usize, seed: u64) -> Self {
        let key = signing_key(seed);
        let vk = key.verifying_key();
        let lanes = tx_per_block - 1;
        // One lane output per transfer lane, then funding for edits.
        let genesis_outputs: Vec<TxOutput> =
            (0..lanes + n_blocks).map(|_| TxOutput::pay(&vk, LANE_AMOUNT)).collect();
        let genesis_txid = Self::builder_for(&genesis_outputs, LedgerParams::new(default_policy()), seed).genesis_txid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x776f_726b);
        let mut prev: Vec<OutPoint> = (0..lanes).map(|i| OutPoint { txid: genesis_txid, index: i as u32 }).collect();
        let mut blocks = Vec::with_capacity(n_blocks.saturating_sub(1));
        for _ in 1..n_blocks {
            let mut txs = Vec::with_capacity(lanes);
            for p in prev.iter_mut() {
                let data: [u8; DUMMY_DATA_BYTES] = rng.gen();
                let mut tx = Transaction::new(
                    vec![TxInput::new(*p)],
                    vec![TxOutput::pay(&vk, LANE_AMOUNT), TxOutput::data(data.to_vec())],
                );
                tx.sign_all(&key);
                *p = OutPoint { txid: tx.txid(), index: 0 };
                txs.push(tx);
            }
            blocks.push(txs);
        }
        Workload { n_blocks, tx_per_block, seed, key, genesis_outputs, blocks }
    }

    fn builder_for(outputs: &[TxOutput], params: LedgerParams, seed: u64) -> LedgerBuilder {
        // Mining cost is irrelevant to validation timing.
        LedgerBuilder::new(outputs.to_vec(), DifficultyTarget::pow2(255), params, seed)
    }

    /// The transfer in `lane` at `height`; it sits in slot `lane + 1`.
    pub fn transfer(&self, height: usize, lane: usize) -> Option<&Transaction> {
        self.blocks.get(height.checked_sub(2)?)?.get(lane)
    }

    pub fn matches(&self, spec: &BenchSpec) -> bool {
        self.n_blocks == spec.n_blocks && self.tx_per_block == spec.tx_per_block && self.seed == spec.seed
    }
}

fn default_policy() -> PolicyParams {
    PolicyParams::new(6, 5, Ratio::majority(5)).expect("non-zero")
}

/// Redaction targets: `(height, lane)` pairs, heights distinct and sorted.
pub fn redaction_targets(spec: &BenchSpec) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x7265_6461);
    let first = 2;
    let room = spec.last_target().saturating_sub(first - 1);
    let mut heights: Vec<usize> = sample(&mut rng, room, spec.redactions().min(room))
        .into_iter()
        .map(|i| i + first)
        .collect();
    heights.sort_unstable();
    heights
        .into_iter()
        .map(|h| (h, rng.gen_range(0..spec.tx_per_block - 1)))
        .collect()
}

/// Builds the benchmark chain for `spec`. Each redaction removes the 4
/// data bytes of one transfer, is requested `k` blocks after its target,
/// voted on by every block of its window and applied once accepted.
pub fn generate_chain(spec: &BenchSpec, work: &Workload) -> Result<LedgerChain, SpecInvalid> {
    spec.check()?;
    assert!(work.matches(spec), "workload was generated for a different size or seed");
    let params = spec.params()?;
    let mut b = Workload::builder_for(&work.genesis_outputs, params, spec.seed);
    let g = b.genesis_txid();
    let lanes = spec.tx_per_block - 1;
    let mut edits: std::collections::BTreeMap<usize, Vec<(Transaction, Transaction)>> = Default::default();
    for (t, lane) in redaction_targets(spec) {
        let old = work.blocks[t - 2][lane].clone();
        let mut cand = old.clone();
        cand.outputs[1].script.clear();
        edits.entry(t + spec.k).or_default().push((old, cand));
    }
    let mut funding_index = lanes;
    for height in 2..=spec.n_blocks {
        let mut txs = work.blocks[height - 2].clone();
        for (old, cand) in edits.remove(&height).unwrap_or_default() {
            b.register_candidate(old.clone(), cand.clone()).expect("valid candidate");
            let funding = Funding {
                outpoint: OutPoint { txid: g, index: funding_index as u32 },
                amount: LANE_AMOUNT,
                key: work.key.clone(),
            };
            funding_index += 1;
            txs.push(build_edit_tx(&old, &cand, &funding, params.min_edit_fee, params.min_edit_fee).expect("funded"));
        }
        b.mine(txs).expect("workload spends known outputs");
    }
    b.apply_due();
    Ok(b.into_chain())
}

/// One validation run with the chosen validator.
pub fn validate_once(c: &LedgerChain, spec: &BenchSpec) -> Result<(), LedgerFault> {
    let opts = spec.options();
    match spec.mode {
        Validation::Redactable => validate_ledger_chain(c, &spec.params().expect("checked"), opts).map(|_| ()),
        Validation::Immutable => validate_ledger_chain_immutable(c, opts).map(|_| ()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub name: String,
    pub spec: BenchSpec,
    pub redactions: usize,
    pub runs_ms: Vec<f64>,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub overhead_pct: Option<f64>,
    pub baseline_name: Option<String>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl BenchResult {
    fn from_runs(name: String, spec: BenchSpec, redactions: usize, runs_ms: Vec<f64>) -> Self {
        let (mean_ms, stddev_ms) = mean_std(&runs_ms);
        BenchResult { name, spec, redactions, runs_ms, mean_ms, stddev_ms, overhead_pct: None, baseline_name: None }
    }

    pub fn set_baseline(&mut self, baseline: &BenchResult) {
        self.overhead_pct = Some(100.0 * (self.mean_ms - baseline.mean_ms) / baseline.mean_ms);
        self.baseline_name = Some(baseline.name.clone());
    }
}

/// A chain to time, with the validator used on it.
pub struct BenchCase {
    pub name: String,
    pub spec: BenchSpec,
    pub chain: LedgerChain,
}

/// Times every case `repetitions` times. Repetitions are interleaved across
/// cases so that slow drift of the machine affects all of them alike; only
/// the validation call is inside the timed region.
pub fn bench_validate(cases: &[BenchCase], repetitions: usize) -> Result<Vec<BenchResult>, LedgerFault> {
    for case in cases {
        validate_once(&case.chain, &case.spec)?;
    }
    let mut runs: Vec<Vec<f64>> = vec![Vec::with_capacity(repetitions); cases.len()];
    for rep in 0..repetitions {
        // Alternate the order so that a linear drift within a sweep adds
        // the same amount to every case over two sweeps.
        let order: Vec<usize> = if rep % 2 == 0 {
            (0..cases.len()).collect()
        } else {
            (0..cases.len()).rev().collect()
        };
        for i in order {
            let case = &cases[i];
            let start = Instant::now();
            let r = validate_once(&case.chain, &case.spec);
            runs[i].push(start.elapsed().as_secs_f64() * 1e3);
            r?;
        }
    }
    Ok(cases
        .iter()
        .zip(runs)
        .map(|(c, r)| {
            let redactions = c.chain.blocks.iter().flat_map(|b| &b.txs.slots).filter(|s| s.old_txid.is_some()).count();
            BenchResult::from_runs(c.name.clone(), c.spec, redactions, r)
        })
        .collect())
}

pub const CSV_COLUMNS: [&str; 15] = [
    "name",
    "validator",
    "n_blocks",
    "tx_per_block",
    "redaction_fraction",
    "redactions",
    "k",
    "ell",
    "rho",
    "repetitions",
    "seed",
    "mean_ms",
    "stddev_ms",
    "overhead_pct",
    "baseline_name",
];

pub fn write_csv<W: Write>(w: W, results: &[BenchResult]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in results {
        let s = &r.spec;
        let rho = s.policy().map(|p| p.rho.to_string()).unwrap_or_default();
        out.write_record([
            r.name.clone(),
            s.mode.as_str().to_string(),
            s.n_blocks.to_string(),
            s.tx_per_block.to_string(),
            s.redaction_fraction.to_string(),
            r.redactions.to_string(),
            s.k.to_string(),
            s.ell.to_string(),
            rho,
            r.runs_ms.len().to_string(),
            s.seed.to_string(),
            format!("{:.4}", r.mean_ms),
            format!("{:.4}", r.stddev_ms),
            r.overhead_pct.map(|o| format!("{o:.4}")).unwrap_or_default(),
            r.baseline_name.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Least-squares polynomial fit; coefficients from the constant term up.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Option<Vec<f64>> {
    if xs.len() != ys.len() || xs.len() <= degree {
        return None;
    }
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    Some(sol.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    /// Slope of the straight-line fit.
    pub slope: f64,
    /// `[c0, c1, c2]` of the quadratic fit.
    pub quadratic: [f64; 3],
    pub x_max: f64,
    /// `|c2| x_max^2 / |c1 x_max|`: curvature relative to the linear term
    /// at the largest x.
    pub curvature_ratio: f64,
}

impl TrendFit {
    pub fn new(xs: &[f64], ys: &[f64]) -> Option<Self> {
        let lin = polyfit(xs, ys, 1)?;
        let q = polyfit(xs, ys, 2)?;
        let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let linear = (q[1] * x_max).abs();
        let curve = q[2].abs() * x_max * x_max;
        let curvature_ratio = if linear > 0.0 { curve / linear } else { f64::INFINITY };
        Some(TrendFit { slope: lin[1], quadratic: [q[0], q[1], q[2]], x_max, curvature_ratio })
    }

    /// Non-negative slope and curvature under `max_ratio` of the linear term.
    pub fn at_most_linear(&self, max_ratio: f64) -> bool {
        self.slope >= 0.0 && self.curvature_ratio < max_ratio
    }
}

/// Overhead of redactable over immutable validation on a chain without
/// redactions.
pub fn experiment_no_redactions(base: &BenchSpec, work: &Workload) -> Result<Vec<BenchResult>, ExperimentError> {
    let spec = BenchSpec { redaction_fraction: 0.0, ..*base };
    let chain = generate_chain(&spec, work)?;
    let immutable = BenchSpec { mode: Validation::Immutable, ..spec };
    let cases = vec![
        BenchCase { name: "immutable".into(), spec: immutable, chain: chain.clone() },
        BenchCase { name: "redactable".into(), spec, chain },
    ];
    let mut out = bench_validate(&cases, spec.repetitions)?;
    let baseline = out[0].clone();
    out[1].set_baseline(&baseline);
    Ok(out)
}

/// Overhead against the redactable validator on the unredacted chain for
/// each redaction fraction.
pub fn experiment_redactions(
    base: &BenchSpec,
    fractions: &[f64],
    work: &Workload,
) -> Result<Vec<BenchResult>, ExperimentError> {
    let mut cases = Vec::new();
    for &f in std::iter::once(&0.0).chain(fractions) {
        let spec = BenchSpec { redaction_fraction: f, mode: Validation::Redactable, ..*base };
        let name = if f == 0.0 { "redactable-0".to_string() } else { format!("redact-{f}") };
        cases.push(BenchCase { name, spec, chain: generate_chain(&spec, work)? });
    }
    let mut out = bench_validate(&cases, base.repetitions)?;
    let baseline = out[0].clone();
    for r in out.iter_mut().skip(1) {
        r.set_baseline(&baseline);
    }
    Ok(out)
}

/// Overhead for each voting period against the first one, with majority
/// thresholds.
pub fn experiment_ell(base: &BenchSpec, ells: &[usize], work: &Workload) -> Result<Vec<BenchResult>, ExperimentError> {
    let mut cases = Vec::new();
    for &ell in ells {
        let spec = BenchSpec { ell, rho: None, mode: Validation::Redactable, ..*base };
        cases.push(BenchCase { name: format!("ell-{ell}"), spec, chain: generate_chain(&spec, work)? });
    }
    let mut out = bench_validate(&cases, base.repetitions)?;
    let baseline = out[0].clone();
    for r in out.iter_mut().skip(1) {
        r.set_baseline(&baseline);
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Spec(#[from] SpecInvalid),
    #[error("generated chain failed validation: {0}")]
    Invalid(#[from] LedgerFault),
}
