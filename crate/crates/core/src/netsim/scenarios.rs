//! Scripted attack scenarios and the two-slot observation scenario showing
//! where plain common prefix and editable common prefix part ways.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use ed25519_dalek::SigningKey;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checkers::{check_editable_common_prefix, check_editable_common_prefix_views, check_plain_common_prefix_views};
use super::{run_simulation, AdversarySpec, Observation, SimConfig, SimMode, Strategy};
use crate::chain::{default_genesis, BlockPayload, Chain};
use crate::hashcore::{hash_h, Digest, DifficultyTarget};
use crate::ledger::{
    build_edit_tx, coinbase, mine_ledger_block, signing_key, validate_ledger_chain, verify_victim_claim,
    verify_witness, Funding, LedgerBuilder, LedgerChain, LedgerFaultKind, LedgerOptions, LedgerParams, OutPoint,
    SpendError, Transaction, TxInput, TxList, TxOutput, SUBSIDY,
};
use crate::node::{DataRules, NodeConfig, NodeEvent, NodeState, RoundInput};
use crate::redaction::{evaluate_policy, CandidateBlock, PolicyParams, PolicyVerdict, Ratio};

pub const SCENARIOS: [&str; 5] = [
    "unapproved-editing",
    "denial-of-service",
    "false-victim",
    "double-spend",
    "consensus-delays",
];

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown scenario {0:?}; expected one of {SCENARIOS:?}")]
pub struct UnknownScenario(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub passes: usize,
    pub failures: Vec<String>,
    pub details: serde_json::Value,
}

impl VerdictReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.passes == self.seeds.len()
    }
}

/// Number of seeds each scenario runs.
pub const SCENARIO_SEEDS: u64 = 20;

pub fn run_attack_scenario(name: &str, cfg: &SimConfig) -> Result<VerdictReport, UnknownScenario> {
    let seeds: Vec<u64> = (0..SCENARIO_SEEDS).map(|i| cfg.master_seed.wrapping_add(i)).collect();
    let mut report = VerdictReport {
        scenario: name.to_string(),
        seeds: seeds.clone(),
        passes: 0,
        failures: Vec::new(),
        details: serde_json::Value::Null,
    };
    let mut details = Vec::new();
    for &seed in &seeds {
        let outcome = match name {
            "unapproved-editing" => unapproved_editing(cfg, seed),
            "denial-of-service" => denial_of_service(seed),
            "false-victim" => false_victim(seed),
            "double-spend" => double_spend_fixture(seed).map(|_| serde_json::json!({ "rejected": "AlreadySpent" })),
            "consensus-delays" => consensus_delays(cfg, seed),
            _ => return Err(UnknownScenario(name.to_string())),
        };
        match outcome {
            Ok(d) => {
                report.passes += 1;
                details.push(serde_json::json!({ "seed": seed, "result": d }));
            }
            Err(e) => report.failures.push(format!("seed {seed}: {e}")),
        }
    }
    report.details = serde_json::Value::Array(details);
    Ok(report)
}

fn with_seed(cfg: &SimConfig, seed: u64) -> SimConfig {
    let mut c = cfg.clone();
    c.master_seed = seed;
    c
}

fn unapproved_editing(cfg: &SimConfig, seed: u64) -> Result<serde_json::Value, String> {
    let mut c = with_seed(cfg, seed);
    c.mode = SimMode::Single;
    if c.n_corrupt == 0 {
        c.n_corrupt = (c.n_nodes / 5).max(1).min(c.n_nodes - 1);
    }
    let adv = AdversarySpec::with_strategy(Strategy::UnapprovedEdit { round: c.rounds / 4 });
    let t = run_simulation(&c, &adv).map_err(|e| e.to_string())?;
    if t.tampered.is_empty() {
        return Err("the adversary never mined a block to attach a forged edit to".into());
    }
    let mut seen: HashSet<*const Chain> = HashSet::new();
    let mut adopted = BTreeSet::new();
    for o in t.observations.iter().filter(|o| o.honest) {
        if !seen.insert(Arc::as_ptr(&o.chain)) {
            continue;
        }
        if o.chain.blocks().iter().any(|b| t.tampered.contains(&b.version_digest())) {
            adopted.insert(o.node);
        }
    }
    if !adopted.is_empty() {
        return Err(format!("honest nodes {adopted:?} adopted a tampered chain"));
    }
    Ok(serde_json::json!({ "forged_chains": t.tampered.len(), "honest_adopters": 0 }))
}

/// A ledger chain holding one applied redaction, built by an honest miner.
struct RedactedLedger {
    chain: LedgerChain,
    params: LedgerParams,
    key: SigningKey,
    old: Transaction,
    cand: Transaction,
    slot: (usize, usize),
    genesis_script: Vec<u8>,
}

fn redacted_ledger(seed: u64) -> RedactedLedger {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = signing_key(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let vk = key.verifying_key();
    let k = rng.gen_range(1..=3);
    let ell = rng.gen_range(2..=4u64);
    let policy = PolicyParams::new(k, ell as usize, Ratio::majority(ell)).expect("non-zero");
    let params = LedgerParams::new(policy);
    let funding: Vec<TxOutput> = (0..4).map(|_| TxOutput::pay(&vk, 1_000_000)).collect();
    let genesis_script = funding[0].script.clone();
    let mut b = LedgerBuilder::new(funding, DifficultyTarget::pow2(252), params, seed);
    let g = b.genesis_txid();
    let data: Vec<u8> = (0..rng.gen_range(1..=40)).map(|_| rng.gen()).collect();
    let mut old = Transaction::new(
        vec![TxInput::new(OutPoint { txid: g, index: 0 })],
        vec![TxOutput::pay(&vk, 990_000), TxOutput::data(data)],
    );
    old.sign_all(&key);
    b.mine(vec![old.clone()]).expect("funded");
    let height = b.height();
    let mut cand = old.clone();
    cand.outputs[1].script.clear();
    b.register_candidate(old.clone(), cand.clone()).expect("shrinks data");
    let funding = Funding { outpoint: OutPoint { txid: g, index: 1 }, amount: 1_000_000, key: key.clone() };
    let edit = build_edit_tx(&old, &cand, &funding, params.min_edit_fee, params.min_edit_fee).expect("funded");
    b.mine(vec![edit]).expect("funded");
    while b.chain().get(height).expect("mined").txs.slots[1].old_txid.is_none() {
        b.mine(vec![]).expect("empty block");
    }
    b.mine(vec![]).expect("empty block");
    RedactedLedger {
        chain: b.into_chain(),
        params,
        key,
        old,
        cand,
        slot: (height, 1),
        genesis_script,
    }
}

fn push_block(chain: &mut LedgerChain, txs: Vec<Transaction>, miner: &SigningKey, seed: u64) {
    let height = chain.len() + 1;
    let mut all = vec![coinbase(height, &miner.verifying_key(), SUBSIDY, &[])];
    all.extend(txs);
    let prev = chain.head().expect("genesis").header.id();
    let block = mine_ledger_block(prev, TxList::from_txs(all), chain.difficulty, height as u64, u64::MAX, seed)
        .expect("unbounded search");
    chain.blocks.push(block);
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FalseVictimOutcome {
    pub genuine_accepted: bool,
    pub forged_total: usize,
    pub forged_accepted: usize,
    /// The redacted slot's witness verifies against the stored old id.
    pub witness_ok: bool,
}

/// Builds a redacted ledger chain and checks one genuine and several forged
/// victim claims against it.
pub fn false_victim_fixture(seed: u64) -> FalseVictimOutcome {
    let f = redacted_ledger(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfa15e);
    let claim = |bytes: &[u8]| verify_victim_claim(bytes, f.slot, &f.chain).expect("slot is redacted");
    let mut flipped = f.old.clone();
    let script = &mut flipped.outputs[1].script;
    let i = rng.gen_range(0..script.len());
    script[i] ^= 1 << rng.gen_range(0..8);
    let mut extended = f.old.clone();
    extended.outputs[1].script.push(rng.gen());
    let mut repriced = f.old.clone();
    repriced.outputs[0].amount += 1;
    let random: Vec<u8> = (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect();
    let forged: Vec<Vec<u8>> = vec![
        flipped.to_bytes(),
        extended.to_bytes(),
        repriced.to_bytes(),
        f.cand.to_bytes(),
        random,
        f.chain.blocks[0].txs.slots[0].tx.to_bytes(),
    ];
    let slot_tx = &f.chain.get(f.slot.0).expect("exists").txs.slots[f.slot.1];
    let old_id = slot_tx.old_txid.expect("redacted");
    let witness_ok = slot_tx
        .tx
        .inputs
        .iter()
        .all(|i| verify_witness(&f.genesis_script, &i.witness, &old_id))
        && !verify_witness(&f.genesis_script, &slot_tx.tx.inputs[0].witness, &slot_tx.tx.txid());
    FalseVictimOutcome {
        genuine_accepted: claim(&f.old.to_bytes()),
        forged_total: forged.len(),
        forged_accepted: forged.iter().filter(|b| claim(b)).count(),
        witness_ok,
    }
}

fn false_victim(seed: u64) -> Result<serde_json::Value, String> {
    let o = false_victim_fixture(seed);
    if !o.genuine_accepted {
        return Err("genuine claim rejected".into());
    }
    if o.forged_accepted > 0 {
        return Err(format!("{} forged claims accepted", o.forged_accepted));
    }
    if !o.witness_ok {
        return Err("redacted witness does not verify against its old id".into());
    }
    serde_json::to_value(o).map_err(|e| e.to_string())
}

/// Spends a redacted transaction's output twice, once through its original
/// id and once through its current id, in an order chosen by `seed`. Ok iff
/// the first spend validates and the second is rejected as already spent.
pub fn double_spend_fixture(seed: u64) -> Result<(), String> {
    let f = redacted_ledger(seed);
    let mut chain = f.chain.clone();
    validate_ledger_chain(&chain, &f.params, LedgerOptions::full()).map_err(|e| format!("base chain: {e}"))?;
    let (old_id, new_id) = (f.old.txid(), f.cand.txid());
    let spend = |via: Digest, amount: u64| {
        let mut tx = Transaction::new(
            vec![TxInput::new(OutPoint { txid: via, index: 0 })],
            vec![TxOutput::pay(&f.key.verifying_key(), amount)],
        );
        tx.sign_all(&f.key);
        tx
    };
    let (first, second) = if seed.is_multiple_of(2) { (old_id, new_id) } else { (new_id, old_id) };
    let a = spend(first, 980_000);
    let b = spend(second, 970_000);
    match seed % 4 {
        0 | 1 => {
            push_block(&mut chain, vec![a], &f.key, seed);
            validate_ledger_chain(&chain, &f.params, LedgerOptions::full()).map_err(|e| format!("first spend: {e}"))?;
            for i in 0..(seed % 3) {
                push_block(&mut chain, vec![], &f.key, seed + 100 + i);
            }
            push_block(&mut chain, vec![b], &f.key, seed + 1);
        }
        _ => push_block(&mut chain, vec![a, b], &f.key, seed),
    }
    match validate_ledger_chain(&chain, &f.params, LedgerOptions::full()) {
        Err(fault) if matches!(fault.kind, LedgerFaultKind::Spend { error: SpendError::AlreadySpent, .. }) => Ok(()),
        Err(fault) => Err(format!("rejected for the wrong reason: {fault}")),
        Ok(_) => Err("second spend accepted".into()),
    }
}

fn denial_of_service(seed: u64) -> Result<serde_json::Value, String> {
    let mut rows = Vec::new();
    let policy = PolicyParams::new(2, 3, Ratio::majority(3)).expect("non-zero");
    let params = LedgerParams::new(policy);
    for n in [1usize, 2, 4, 8] {
        let key = signing_key(seed.wrapping_add(n as u64 * 1000));
        let vk = key.verifying_key();
        let outputs: Vec<TxOutput> = (0..2 * n + 1).map(|_| TxOutput::pay(&vk, 1_000_000)).collect();
        let mut b = LedgerBuilder::new(outputs, DifficultyTarget::pow2(252), params, seed ^ n as u64);
        let g = b.genesis_txid();
        let targets: Vec<Transaction> = (0..n)
            .map(|i| {
                let mut tx = Transaction::new(
                    vec![TxInput::new(OutPoint { txid: g, index: i as u32 })],
                    vec![TxOutput::pay(&vk, 999_000), TxOutput::data(format!("spam{i}").into_bytes())],
                );
                tx.sign_all(&key);
                tx
            })
            .collect();
        b.mine(targets.clone()).map_err(|e| e.to_string())?;
        let mut paid = 0u64;
        let mut edits = Vec::new();
        for (i, old) in targets.iter().enumerate() {
            let mut cand = old.clone();
            cand.outputs[1].script.clear();
            let funding =
                Funding { outpoint: OutPoint { txid: g, index: (n + i) as u32 }, amount: 1_000_000, key: key.clone() };
            let edit = build_edit_tx(old, &cand, &funding, params.min_edit_fee, params.min_edit_fee)
                .map_err(|e| e.to_string())?;
            paid += funding.amount - edit.output_total().expect("no overflow");
            edits.push(edit);
        }
        b.mine(edits).map_err(|e| e.to_string())?;
        let report = validate_ledger_chain(b.chain(), &params, LedgerOptions::full()).map_err(|e| e.to_string())?;
        if report.edit_txs != n || paid != n as u64 * params.min_edit_fee {
            return Err(format!("{n} edits paid {paid}, expected {}", n as u64 * params.min_edit_fee));
        }

        // An edit request below the minimum fee invalidates its block.
        let mut cheap_chain = b.chain().clone();
        let old = &targets[0];
        let mut cand = old.clone();
        cand.outputs[1].script.truncate(1);
        let funding = Funding { outpoint: OutPoint { txid: g, index: 2 * n as u32 }, amount: 1_000_000, key: key.clone() };
        let cheap = build_edit_tx(old, &cand, &funding, params.min_edit_fee - 1, 0).map_err(|e| e.to_string())?;
        push_block(&mut cheap_chain, vec![cheap], &key, seed);
        match validate_ledger_chain(&cheap_chain, &params, LedgerOptions::full()) {
            Err(f) if matches!(f.kind, LedgerFaultKind::EditFeeTooLow { .. }) => {}
            other => return Err(format!("underpaying edit request not rejected: {other:?}")),
        }
        rows.push(serde_json::json!({ "edits": n, "fees_paid": paid }));
    }
    Ok(serde_json::Value::Array(rows))
}

fn consensus_delays(cfg: &SimConfig, seed: u64) -> Result<serde_json::Value, String> {
    let mut c = with_seed(cfg, seed);
    c.rounds = c.rounds.min(200);
    let k = c.policy.k;
    let mut t = run_simulation(&c, &AdversarySpec::delay_only()).map_err(|e| e.to_string())?;
    let clean = check_editable_common_prefix(&t, k);
    if !clean.passed() {
        return Err(format!("{} violations without injection", clean.violations));
    }
    // One honest node ends up with a different set of redacted blocks.
    let last = t
        .observations
        .iter()
        .rposition(|o| o.honest)
        .ok_or("no honest node")?;
    let mut chain = (*t.observations[last].chain).clone();
    let stable = chain.len().saturating_sub(k);
    let j = (2..=stable)
        .find(|&j| chain.get(j).is_some_and(|b| b.is_unredacted() && !b.payload.entries.is_empty()))
        .ok_or("no stable block with data")?;
    let mut b = chain.get(j).expect("in range").clone();
    b.payload.entries.pop();
    chain.replace(j, b).map_err(|e| e.to_string())?;
    t.observations[last].chain = Arc::new(chain);
    let injected = check_editable_common_prefix(&t, k);
    if injected.passed() {
        return Err("divergent redaction set not flagged".into());
    }
    Ok(serde_json::json!({
        "clean_pairs": clean.pairs,
        "clean_lagging": clean.lagging,
        "injected_violations": injected.violations,
        "injected_index": j,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeReport {
    pub target: usize,
    pub slot1_round: u64,
    pub slot1_verdict: PolicyVerdict,
    pub slot2_round: u64,
    pub plain_violations: usize,
    pub editable_violations: usize,
}

impl NarrativeReport {
    /// The edit was still being voted on at slot 1, and only the plain
    /// common prefix check objects to the pair of views.
    pub fn passed(&self) -> bool {
        self.slot1_verdict == PolicyVerdict::Voting && self.plain_violations > 0 && self.editable_violations == 0
    }
}

/// One honest party proposes an edit; it is observed once while the vote is
/// open and once after the edit was applied.
pub fn narrative_scenario(seed: u64) -> NarrativeReport {
    let params = PolicyParams::new(2, 3, Ratio::new(2, 3).expect("non-zero")).expect("non-zero");
    let cfg = Arc::new(NodeConfig {
        mode: crate::chain::Mode::Single,
        params,
        data: DataRules::Structural,
        genesis: default_genesis(),
        difficulty: DifficultyTarget::MAX,
        max_entries_per_block: 4,
    });
    let mut node = NodeState::new(0, cfg, seed);
    let mut round = 0u64;
    let mut step = |node: &mut NodeState, env: Vec<Vec<u8>>| {
        round += 1;
        let seed = hash_h(&[&seed.to_le_bytes(), &round.to_le_bytes()]);
        let out = node.step_round(
            RoundInput { messages: vec![], environment: env },
            1,
            u64::from_le_bytes(seed.0[..8].try_into().expect("8 bytes")),
        );
        (round, out.events)
    };
    for i in 0..6 {
        step(&mut node, vec![format!("entry-{seed}-{i}").into_bytes()]);
    }
    let target = 3;
    let original = node.chain.get(target).expect("mined").clone();
    let payload = BlockPayload::new(Vec::new(), original.payload.votes.clone());
    node.submit_edit_proposal(target, payload.clone()).expect("target is stable");
    let cand = CandidateBlock {
        target_index: target,
        block: crate::redaction::candidate_for(&original, target, payload, crate::chain::Mode::Single).block,
    };

    let (r1, _) = step(&mut node, vec![]);
    let c1 = Arc::clone(&node.chain);
    let slot1_verdict = evaluate_policy(&c1, &cand, &params);
    let mut r2 = r1;
    for _ in 0..20 {
        let (r, events) = step(&mut node, vec![]);
        r2 = r;
        if events.iter().any(|e| matches!(e, NodeEvent::Applied { .. })) {
            break;
        }
    }
    let c2 = Arc::clone(&node.chain);
    let views = vec![
        Observation { node: 1, round: r1, honest: true, chain: c1 },
        Observation { node: 2, round: r2, honest: true, chain: c2 },
    ];
    NarrativeReport {
        target,
        slot1_round: r1,
        slot1_verdict,
        slot2_round: r2,
        plain_violations: check_plain_common_prefix_views(&views, &params, params.k).violations,
        editable_violations: check_editable_common_prefix_views(&views, &params, params.k).violations,
    }
}
