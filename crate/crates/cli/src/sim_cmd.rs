//! Network simulation and attack scenarios.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use redact_core::netsim::{
    audit_delivery, check_chain_growth, check_chain_quality, check_editable_common_prefix, check_liveness,
    check_plain_common_prefix, run_attack_scenario, run_simulation, AdversarySpec, DelayPolicy, DeliveryAudit,
    GrowthReport, LivenessReport, PrefixReport, QualityReport, SimConfig, SimMode, Strategy, SCENARIOS,
};
use redact_core::redaction::{PolicyParams, Ratio};
use serde::{Deserialize, Serialize};

use crate::io;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    DelayOnly,
    MaliciousCandidate,
    UnapprovedEdit,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON file with `config` and `adversary` objects (as in a trace header).
    /// Other flags are ignored when it is given.
    #[arg(long)]
    sim_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    corrupt: usize,
    #[arg(long, default_value_t = 300)]
    rounds: u64,
    /// Hash attempts per node per round.
    #[arg(long, default_value_t = 4)]
    q: u64,
    /// Maximum delivery delay in rounds.
    #[arg(long, default_value_t = 2)]
    delay: u64,
    #[arg(long, value_enum, default_value_t = DelayArg::Random)]
    delay_policy: DelayArg,
    /// Expected blocks per round over all nodes.
    #[arg(long, default_value_t = 0.2)]
    rate: f64,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    ell: usize,
    #[arg(long, default_value = "3/5")]
    rho: Ratio,
    #[arg(long, default_value = "single")]
    mode: SimMode,
    #[arg(long, default_value_t = 40)]
    edit_start: u64,
    /// Rounds between edit requests; 0 disables them.
    #[arg(long, default_value_t = 45)]
    edit_interval: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::DelayOnly)]
    strategy: StrategyArg,
    /// First round of the adversarial strategy.
    #[arg(long, default_value_t = 40)]
    strategy_round: u64,
    /// Rounds between malicious candidates.
    #[arg(long, default_value_t = 120)]
    strategy_every: u64,
    /// Minimum growth rate reported as passing.
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    /// Round span of the growth check.
    #[arg(long, default_value_t = 50)]
    span: u64,
    /// Maximum corrupt-block share reported as passing.
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Per-round trace (JSON Lines).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Property report (JSON); standard output if absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DelayArg {
    Random,
    Max,
}

#[derive(Deserialize)]
struct SimFile {
    config: SimConfig,
    #[serde(default)]
    adversary: AdversarySpec,
}

#[derive(Serialize)]
struct SimReport {
    config: SimConfig,
    adversary: AdversarySpec,
    growth: GrowthReport,
    quality: QualityReport,
    editable_common_prefix: PrefixReport,
    plain_common_prefix: PrefixReport,
    liveness: LivenessReport,
    delivery: DeliveryAudit,
    redactions: usize,
    malicious_applied: usize,
}

impl SimulateArgs {
    fn build(&self) -> Result<(SimConfig, AdversarySpec), CliError> {
        if let Some(p) = &self.sim_config {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            let f: SimFile = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            return Ok((f.config, f.adversary));
        }
        let mut cfg = SimConfig {
            n_nodes: self.nodes,
            n_corrupt: self.corrupt,
            rounds: self.rounds,
            q: self.q,
            max_delay: self.delay,
            policy: PolicyParams::new(self.k, self.ell, self.rho)?,
            mode: self.mode,
            master_seed: self.seed,
            edit_start: self.edit_start,
            edit_interval: self.edit_interval,
            scenario: "cli".into(),
            ..SimConfig::standard(self.seed)
        };
        cfg.calibrate(self.rate);
        let strategy = match self.strategy {
            StrategyArg::DelayOnly => Strategy::DelayOnly,
            StrategyArg::MaliciousCandidate => Strategy::MaliciousCandidate {
                round: self.strategy_round,
                every: self.strategy_every,
            },
            StrategyArg::UnapprovedEdit => Strategy::UnapprovedEdit { round: self.strategy_round },
        };
        let mut adv = AdversarySpec::with_strategy(strategy);
        adv.delay = match self.delay_policy {
            DelayArg::Random => DelayPolicy::Random,
            DelayArg::Max => DelayPolicy::Max,
        };
        Ok((cfg, adv))
    }
}

/// Exits 1 if the editable common prefix or the delivery audit fails, or a
/// malicious candidate was applied by an honest node. Growth and quality are
/// reported against the given thresholds but do not affect the exit status.
pub fn simulate(a: SimulateArgs) -> CliResult {
    let (cfg, adv) = a.build()?;
    let trace = run_simulation(&cfg, &adv)?;
    if let Some(p) = &a.out {
        let mut w = io::writer(Some(p))?;
        trace.write_jsonl(&mut w)?;
        w.flush()?;
    }
    let k = cfg.policy.k;
    let report = SimReport {
        growth: check_chain_growth(&trace, a.tau, a.span),
        quality: check_chain_quality(&trace, a.mu, cfg.policy.ell),
        editable_common_prefix: check_editable_common_prefix(&trace, k),
        plain_common_prefix: check_plain_common_prefix(&trace, k),
        liveness: check_liveness(&trace, k),
        delivery: audit_delivery(&trace),
        redactions: trace.redactions_in_final_chains(),
        malicious_applied: trace.honest_applications(&trace.malicious),
        config: cfg,
        adversary: adv,
    };
    io::emit_json(&report, a.report.as_deref())?;
    let mut failures = Vec::new();
    if !report.editable_common_prefix.passed() {
        failures.push(format!("{} editable common prefix violations", report.editable_common_prefix.violations));
    }
    if !report.delivery.passed() {
        failures.push("delivery audit failed".to_string());
    }
    if report.malicious_applied > 0 {
        failures.push(format!("{} malicious candidates applied", report.malicious_applied));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invalid(failures.join("; ")))
    }
}

#[derive(Args)]
pub struct AttackArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(SCENARIOS))]
    scenario: String,
    /// First of the consecutive seeds the scenario runs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Verdict report (JSON); standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn attack(a: AttackArgs) -> CliResult {
    let cfg = SimConfig::standard(a.seed);
    let report = run_attack_scenario(&a.scenario, &cfg)?;
    io::emit_json(&report, a.out.as_deref())?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "{}: {}/{} seeds passed",
            report.scenario,
            report.passes,
            report.seeds.len()
        )))
    }
}
