//! Deterministic round-based network simulator with an adversary that
//! schedules delivery, corrupts parties and forges blocks or candidates.

mod checkers;
mod scenarios;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{default_genesis, genesis_block, BlockPayload, Chain, Mode};
use crate::hashcore::{hash_h, Digest, DifficultyTarget};
use crate::ledger::{Transaction, TxInput, TxOutput, OutPoint};
use crate::node::{DataRules, EndorsementRule, Message, NodeConfig, NodeEvent, NodeState, Role, RoundInput};
use crate::redaction::{candidate_for, PolicyParams, Ratio};

pub use checkers::{
    audit_delivery, check_chain_growth, check_chain_quality, check_editable_common_prefix,
    check_editable_common_prefix_views, check_liveness, check_plain_common_prefix, check_plain_common_prefix_views,
    DeliveryAudit, GrowthReport, LivenessReport, PrefixReport, PrefixViolation, QualityReport,
};
pub use scenarios::{
    double_spend_fixture, false_victim_fixture, narrative_scenario, run_attack_scenario, NarrativeReport,
    UnknownScenario, VerdictReport, SCENARIOS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Single,
    Ext,
    Ledger,
}

impl SimMode {
    pub fn chain_mode(self) -> Mode {
        match self {
            SimMode::Ext => Mode::Ext,
            _ => Mode::Single,
        }
    }

    pub fn data_rules(self) -> DataRules {
        match self {
            SimMode::Ledger => DataRules::Ledger,
            _ => DataRules::Structural,
        }
    }
}

impl std::str::FromStr for SimMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(SimMode::Single),
            "ext" => Ok(SimMode::Ext),
            "ledger" => Ok(SimMode::Ledger),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub n_corrupt: usize,
    pub rounds: u64,
    /// Hash attempts per node per round.
    pub q: u64,
    /// Δ: upper bound on delivery delay in rounds.
    pub max_delay: u64,
    pub difficulty: DifficultyTarget,
    pub policy: PolicyParams,
    pub mode: SimMode,
    pub master_seed: u64,
    pub scenario: String,
    pub entries_per_round: usize,
    pub max_entries_per_block: usize,
    /// First round at which an honest node is asked to propose an edit.
    pub edit_start: u64,
    /// Rounds between edit requests; 0 disables them.
    pub edit_interval: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigInvalid {
    #[error("nCorrupt ({n_corrupt}) must be below nNodes ({n_nodes})")]
    TooManyCorrupt { n_nodes: usize, n_corrupt: usize },
    #[error("maxDelay must be at least 1")]
    ZeroDelay,
    #[error("at least one node is required")]
    NoNodes,
    #[error("corruption event names node {0}, which does not exist")]
    UnknownNode(usize),
}

impl SimConfig {
    /// Ten nodes, two corrupt, Δ = 2, one block every ~5 rounds.
    pub fn standard(master_seed: u64) -> Self {
        let mut cfg = SimConfig {
            n_nodes: 10,
            n_corrupt: 2,
            rounds: 300,
            q: 4,
            max_delay: 2,
            difficulty: DifficultyTarget::MAX,
            policy: PolicyParams::new(6, 5, Ratio::new(3, 5).expect("non-zero")).expect("non-zero"),
            mode: SimMode::Single,
            master_seed,
            scenario: "standard".into(),
            entries_per_round: 1,
            max_entries_per_block: 16,
            edit_start: 40,
            edit_interval: 45,
        };
        cfg.calibrate(0.2);
        cfg
    }

    /// Sets the difficulty so that all nodes together find about `rate`
    /// blocks per round.
    pub fn calibrate(&mut self, rate: f64) {
        let attempts = (self.n_nodes as f64) * (self.q as f64);
        self.difficulty = DifficultyTarget::from_probability(rate / attempts);
    }

    /// Expected blocks per round over all nodes.
    pub fn expected_rate(&self) -> f64 {
        let p = self.difficulty.success_probability();
        1.0 - (1.0 - p).powf((self.n_nodes as f64) * (self.q as f64))
    }

    pub fn check(&self, adv: &AdversarySpec) -> Result<(), ConfigInvalid> {
        if self.n_nodes == 0 {
            return Err(ConfigInvalid::NoNodes);
        }
        if self.n_corrupt >= self.n_nodes {
            return Err(ConfigInvalid::TooManyCorrupt {
                n_nodes: self.n_nodes,
                n_corrupt: self.n_corrupt,
            });
        }
        if self.max_delay == 0 {
            return Err(ConfigInvalid::ZeroDelay);
        }
        if let Some(e) = adv.corruption.iter().find(|e| e.node >= self.n_nodes) {
            return Err(ConfigInvalid::UnknownNode(e.node));
        }
        Ok(())
    }

    fn node_config(&self) -> NodeConfig {
        NodeConfig {
            mode: self.mode.chain_mode(),
            params: self.policy,
            data: self.mode.data_rules(),
            genesis: match self.mode {
                // Ledger payload rules only admit encoded transactions.
                SimMode::Ledger => genesis_block(BlockPayload::default()),
                _ => default_genesis(),
            },
            difficulty: self.difficulty,
            max_entries_per_block: self.max_entries_per_block,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DelayPolicy {
    /// Uniform in `1..=Δ`.
    #[default]
    Random,
    /// Always Δ.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionEvent {
    pub round: u64,
    pub node: usize,
    pub corrupt: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Corrupt parties follow the protocol; the adversary only delays.
    #[default]
    DelayOnly,
    /// From `round` on, corrupt parties propose candidates no honest party
    /// endorses and vote for them.
    MaliciousCandidate { round: u64, every: u64 },
    /// From `round` on, blocks mined by corrupt parties are broadcast on a
    /// chain with a stable block edited without votes.
    UnapprovedEdit { round: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct AdversarySpec {
    pub delay: DelayPolicy,
    /// Applied on top of the initial corruption of the last `n_corrupt` nodes.
    pub corruption: Vec<CorruptionEvent>,
    pub strategy: Strategy,
}

impl AdversarySpec {
    pub fn delay_only() -> Self {
        AdversarySpec::default()
    }

    pub fn with_strategy(strategy: Strategy) -> Self {
        AdversarySpec {
            strategy,
            ..Default::default()
        }
    }
}

/// A node's chain as held at the end of a round.
#[derive(Debug, Clone)]
pub struct Observation {
    pub node: usize,
    pub round: u64,
    pub honest: bool,
    pub chain: Arc<Chain>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub node: usize,
    pub round: u64,
    pub corrupt: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub honest: bool,
    pub len: usize,
    pub head: Digest,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastRecord {
    pub id: u64,
    pub from: usize,
    pub honest: bool,
    pub kind: String,
    pub digest: Digest,
    /// `(recipient, delivery round)` pairs.
    pub deliver: Vec<(usize, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub id: u64,
    pub to: usize,
    pub digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub node: usize,
    #[serde(flatten)]
    pub event: NodeEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub node: usize,
    pub target: usize,
    pub digest: Digest,
    pub malicious: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub nodes: Vec<NodeRecord>,
    pub corruption: Vec<CorruptionEvent>,
    pub environment: Vec<String>,
    pub proposals: Vec<ProposalRecord>,
    pub broadcasts: Vec<BroadcastRecord>,
    pub deliveries: Vec<DeliveryRecord>,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub config: SimConfig,
    pub adversary: AdversarySpec,
    pub rounds: Vec<RoundRecord>,
    pub observations: Vec<Observation>,
    pub provenance: BTreeMap<Digest, Provenance>,
    /// `(round, entry)` for every environment input.
    pub environment: Vec<(u64, Vec<u8>)>,
    pub malicious: BTreeSet<Digest>,
    /// Version digests of blocks the adversary edited without approval.
    pub tampered: BTreeSet<Digest>,
}

#[derive(Serialize)]
struct TraceHeader<'a> {
    config: &'a SimConfig,
    adversary: &'a AdversarySpec,
}

impl SimTrace {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = TraceHeader {
            config: &self.config,
            adversary: &self.adversary,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &self.rounds {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to memory");
        out
    }

    /// Final chains of nodes that are honest in the last round.
    pub fn final_honest_chains(&self) -> Vec<Arc<Chain>> {
        let last = self.config.rounds;
        self.observations
            .iter()
            .filter(|o| o.round == last && o.honest)
            .map(|o| Arc::clone(&o.chain))
            .collect()
    }

    /// Count of `Applied` events by honest nodes whose candidate digest is
    /// in `set`.
    pub fn honest_applications(&self, set: &BTreeSet<Digest>) -> usize {
        self.rounds
            .iter()
            .flat_map(|r| {
                let honest: BTreeSet<usize> = r.nodes.iter().filter(|n| n.honest).map(|n| n.id).collect();
                r.events
                    .iter()
                    .filter(move |e| honest.contains(&e.node))
                    .filter(|e| matches!(&e.event, NodeEvent::Applied { digest, .. } if set.contains(digest)))
                    .collect::<Vec<_>>()
            })
            .count()
    }

    /// Distinct redactions present in every final honest chain.
    pub fn redactions_in_final_chains(&self) -> usize {
        let chains = self.final_honest_chains();
        let Some(first) = chains.first() else { return 0 };
        let redacted: Vec<usize> = (1..=first.len())
            .filter(|&h| !first.get(h).expect("in range").is_unredacted())
            .collect();
        redacted
            .into_iter()
            .filter(|&h| {
                let v = first.get(h).expect("in range").version_digest();
                chains.iter().all(|c| c.get(h).is_some_and(|b| b.version_digest() == v))
            })
            .count()
    }
}

/// Derives an independent sub-seed from the master seed.
pub fn sub_seed(master: u64, tag: &str, a: u64, b: u64) -> u64 {
    let d = hash_h(&[&master.to_le_bytes(), tag.as_bytes(), &a.to_le_bytes(), &b.to_le_bytes()]);
    u64::from_le_bytes(d.0[..8].try_into().expect("8 bytes"))
}

fn rng_for(master: u64, tag: &str, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master, tag, a, b))
}

struct Pending {
    id: u64,
    to: usize,
    msg: Message,
}

struct LedgerEdit {
    proposer: usize,
    old: Vec<u8>,
    cand: Vec<u8>,
}

fn environment_entry(mode: SimMode, master: u64, round: u64, i: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let tag: [u8; 4] = rng.gen();
    match mode {
        SimMode::Ledger => {
            let prev = hash_h(&[b"env", &master.to_le_bytes(), &round.to_le_bytes(), &(i as u64).to_le_bytes()]);
            let payee = crate::ledger::signing_key(round ^ ((i as u64) << 32)).verifying_key();
            Transaction::new(
                vec![TxInput::new(OutPoint { txid: prev, index: 0 })],
                vec![TxOutput::pay(&payee, 1_000), TxOutput::data(tag.to_vec())],
            )
            .to_bytes()
        }
        _ => format!("tx:{round}:{i}:{}", hex::encode(tag)).into_bytes(),
    }
}

/// Picks a stable block with data and a payload dropping one entry (or, in
/// ledger mode, clearing one transaction's data outputs).
fn pick_edit(
    chain: &Chain,
    k: usize,
    mode: SimMode,
    already: &BTreeSet<usize>,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, BlockPayload, Option<(Vec<u8>, Vec<u8>)>)> {
    let stable = chain.len().saturating_sub(k);
    let choices: Vec<usize> = (2..=stable)
        .filter(|j| !already.contains(j))
        .filter(|&j| {
            let b = chain.get(j).expect("in range");
            b.is_unredacted() && !b.payload.entries.is_empty()
        })
        .collect();
    if choices.is_empty() {
        return None;
    }
    let j = choices[rng.gen_range(0..choices.len())];
    let mut payload = chain.get(j).expect("in range").payload.clone();
    let i = rng.gen_range(0..payload.entries.len());
    match mode {
        SimMode::Ledger => {
            let old = payload.entries[i].clone();
            let mut tx = Transaction::from_bytes(&old).ok()?;
            let data = tx.outputs.iter().position(|o| !o.script.is_empty() && o.amount == 0 && o.kind == crate::ledger::OutputKind::Data)?;
            tx.outputs[data].script.clear();
            let cand = tx.to_bytes();
            payload.entries[i] = cand.clone();
            Some((j, payload, Some((old, cand))))
        }
        _ => {
            payload.entries.remove(i);
            Some((j, payload, None))
        }
    }
}

/// Edit transaction for a ledger-mode simulation. Funding is not checked by
/// the chain-level rules, so a synthetic input is used.
fn sim_edit_tx(old: &[u8], cand: &[u8], round: u64) -> Option<Vec<u8>> {
    let old = Transaction::from_bytes(old).ok()?;
    let cand = Transaction::from_bytes(cand).ok()?;
    let prev = hash_h(&[b"edit-funding", &round.to_le_bytes(), old.txid().as_ref()]);
    let tx = Transaction::new(
        vec![TxInput::new(OutPoint { txid: prev, index: 0 })],
        vec![TxOutput::data(crate::ledger::edit_marker(&old.txid(), &cand.txid()))],
    );
    Some(tx.to_bytes())
}

/// Runs the simulation. A pure function of `(cfg, adv)`.
pub fn run_simulation(cfg: &SimConfig, adv: &AdversarySpec) -> Result<SimTrace, ConfigInvalid> {
    cfg.check(adv)?;
    let node_cfg = Arc::new(cfg.node_config());
    let mut nodes: Vec<NodeState> = (0..cfg.n_nodes)
        .map(|i| NodeState::new(i, Arc::clone(&node_cfg), sub_seed(cfg.master_seed, "miner", i as u64, 0)))
        .collect();

    let mut schedule: BTreeMap<u64, Vec<Pending>> = BTreeMap::new();
    let mut next_msg = 0u64;
    let mut trace = SimTrace {
        config: cfg.clone(),
        adversary: adv.clone(),
        rounds: Vec::new(),
        observations: Vec::new(),
        provenance: BTreeMap::new(),
        environment: Vec::new(),
        malicious: BTreeSet::new(),
        tampered: BTreeSet::new(),
    };
    let mut edited_targets: BTreeSet<usize> = BTreeSet::new();
    let mut ledger_edits: Vec<LedgerEdit> = Vec::new();
    let mut last_malicious: Option<u64> = None;

    for round in 1..=cfg.rounds {
        let mut rec = RoundRecord {
            round,
            nodes: Vec::new(),
            corruption: Vec::new(),
            environment: Vec::new(),
            proposals: Vec::new(),
            broadcasts: Vec::new(),
            deliveries: Vec::new(),
            events: Vec::new(),
        };

        // Corruption.
        if round == 1 {
            for id in cfg.n_nodes - cfg.n_corrupt..cfg.n_nodes {
                nodes[id].role = Role::Corrupted;
                rec.corruption.push(CorruptionEvent { round, node: id, corrupt: true });
            }
        }
        for ev in adv.corruption.iter().filter(|e| e.round == round) {
            let node = &mut nodes[ev.node];
            if ev.corrupt {
                node.role = Role::Corrupted;
            } else if node.role == Role::Corrupted {
                node.reset();
            }
            rec.corruption.push(*ev);
        }
        for n in nodes.iter_mut() {
            n.endorsement = match (n.role, adv.strategy) {
                (Role::Honest, _) | (_, Strategy::DelayOnly) | (_, Strategy::UnapprovedEdit { .. }) => {
                    EndorsementRule::Honest
                }
                (Role::Corrupted, Strategy::MaliciousCandidate { .. }) => {
                    EndorsementRule::Only(trace.malicious.clone())
                }
            };
        }

        // Environment.
        let mut env_rng = rng_for(cfg.master_seed, "env", round, 0);
        let mut env: Vec<Vec<u8>> = (0..cfg.entries_per_round)
            .map(|i| environment_entry(cfg.mode, cfg.master_seed, round, i, &mut env_rng))
            .collect();

        let mut outbound: Vec<(usize, Message)> = Vec::new();
        let honest_ids: Vec<usize> = nodes.iter().filter(|n| n.role == Role::Honest).map(|n| n.id).collect();
        if cfg.edit_interval > 0 && round >= cfg.edit_start && (round - cfg.edit_start).is_multiple_of(cfg.edit_interval) {
            if let Some(&proposer) = honest_ids.get(env_rng.gen_range(0..honest_ids.len().max(1))) {
                let node = &mut nodes[proposer];
                if let Some((j, payload, pair)) =
                    pick_edit(&node.chain, cfg.policy.k, cfg.mode, &edited_targets, &mut env_rng)
                {
                    edited_targets.insert(j);
                    match pair {
                        None => {
                            if let Ok(msg) = node.submit_edit_proposal(j, payload) {
                                if let Message::Candidate(w) = &msg {
                                    rec.proposals.push(ProposalRecord {
                                        node: proposer,
                                        target: j,
                                        digest: w.declared_digest().expect("own wire"),
                                        malicious: false,
                                    });
                                }
                                outbound.push((proposer, msg));
                            }
                        }
                        Some((old, cand)) => {
                            if let Some(edit) = sim_edit_tx(&old, &cand, round) {
                                env.push(edit);
                            }
                            ledger_edits.push(LedgerEdit { proposer, old, cand });
                        }
                    }
                }
            }
        }
        // Ledger edits are proposed once their edit transaction is stable.
        ledger_edits.retain(|e| {
            let node = &mut nodes[e.proposer];
            if node.role != Role::Honest {
                return false;
            }
            let Some(j) = (1..=node.chain.len()).find(|&h| {
                node.chain.get(h).expect("in range").payload.entries.contains(&e.old)
            }) else {
                return true;
            };
            let mut payload = node.chain.get(j).expect("in range").payload.clone();
            for entry in payload.entries.iter_mut().filter(|x| **x == e.old) {
                *entry = e.cand.clone();
            }
            match node.submit_edit_proposal(j, payload) {
                Ok(msg) => {
                    if let Message::Candidate(w) = &msg {
                        rec.proposals.push(ProposalRecord {
                            node: e.proposer,
                            target: j,
                            digest: w.declared_digest().expect("own wire"),
                            malicious: false,
                        });
                    }
                    outbound.push((e.proposer, msg));
                    false
                }
                Err(_) => true,
            }
        });
        for e in &env {
            trace.environment.push((round, e.clone()));
            rec.environment.push(hex::encode(e));
        }

        // Malicious candidates.
        if let Strategy::MaliciousCandidate { round: start, every } = adv.strategy {
            let due = round >= start && last_malicious.is_none_or(|l| every > 0 && round >= l + every);
            let attacker = nodes.iter().position(|n| n.role == Role::Corrupted);
            if let (true, Some(a)) = (due, attacker) {
                let chain = Arc::clone(&nodes[a].chain);
                let stable = chain.len().saturating_sub(cfg.policy.k);
                if stable >= 2 {
                    let mut rng = rng_for(cfg.master_seed, "malicious", round, 0);
                    let j = rng.gen_range(2..=stable);
                    let original = chain.get(j).expect("in range");
                    let payload = BlockPayload::new(
                        vec![format!("malicious:{round}").into_bytes()],
                        original.payload.votes.clone(),
                    );
                    let cand = candidate_for(original, j, payload, cfg.mode.chain_mode());
                    let digest = cand.digest();
                    trace.malicious.insert(digest);
                    for n in nodes.iter_mut().filter(|n| n.role == Role::Corrupted) {
                        n.endorsement = EndorsementRule::Only(trace.malicious.clone());
                    }
                    if let Ok(msg) = nodes[a].submit_candidate(cand) {
                        rec.proposals.push(ProposalRecord { node: a, target: j, digest, malicious: true });
                        outbound.push((a, msg));
                    }
                    last_malicious = Some(round);
                }
            }
        }

        // Deliveries due this round.
        let mut inputs: Vec<RoundInput> = vec![RoundInput::default(); cfg.n_nodes];
        for p in schedule.remove(&round).unwrap_or_default() {
            rec.deliveries.push(DeliveryRecord { id: p.id, to: p.to, digest: p.msg.digest() });
            inputs[p.to].messages.push(p.msg);
        }

        // Step every node.
        for (id, input) in inputs.into_iter().enumerate() {
            let node = &mut nodes[id];
            let input = RoundInput {
                messages: input.messages,
                environment: env.clone(),
            };
            let seed = sub_seed(cfg.master_seed, "mine", id as u64, round);
            let out = node.step_round(input, cfg.q, seed);
            let corrupt = node.role == Role::Corrupted;
            for ev in &out.events {
                if let NodeEvent::Mined { height, .. } = ev {
                    let b = node.chain.get(*height).expect("just mined");
                    trace.provenance.entry(b.identity()).or_insert(Provenance { node: id, round, corrupt });
                }
            }
            rec.events.extend(out.events.into_iter().map(|event| EventRecord { node: id, event }));
            for msg in out.outbound {
                let msg = match (corrupt, adv.strategy, &msg) {
                    (true, Strategy::UnapprovedEdit { round: start }, Message::Chain(c)) if round >= start => {
                        match tamper(c, cfg.policy.k, &mut rng_for(cfg.master_seed, "tamper", id as u64, round)) {
                            Some((t, v)) => {
                                trace.tampered.insert(v);
                                Message::Chain(Arc::new(t))
                            }
                            None => msg,
                        }
                    }
                    _ => msg,
                };
                outbound.push((id, msg));
            }
        }

        // Schedule broadcasts.
        for (from, msg) in outbound {
            let id = next_msg;
            next_msg += 1;
            let mut rng = rng_for(cfg.master_seed, "delay", round, id);
            let mut deliver = Vec::new();
            for to in (0..cfg.n_nodes).filter(|&t| t != from) {
                let d = match adv.delay {
                    DelayPolicy::Random => rng.gen_range(1..=cfg.max_delay),
                    DelayPolicy::Max => cfg.max_delay,
                };
                deliver.push((to, round + d));
                schedule.entry(round + d).or_default().push(Pending { id, to, msg: msg.clone() });
            }
            rec.broadcasts.push(BroadcastRecord {
                id,
                from,
                honest: nodes[from].role == Role::Honest,
                kind: msg.kind().into(),
                digest: msg.digest(),
                deliver,
            });
        }

        for n in &nodes {
            rec.nodes.push(NodeRecord {
                id: n.id,
                honest: n.role == Role::Honest,
                len: n.chain.len(),
                head: n.chain.head().expect("genesis").link_digest(),
                pool: n.pool.len(),
            });
            trace.observations.push(Observation {
                node: n.id,
                round,
                honest: n.role == Role::Honest,
                chain: Arc::clone(&n.chain),
            });
        }
        trace.rounds.push(rec);
    }
    Ok(trace)
}

/// Edits a stable block with data without any votes. Returns the tampered
/// chain and the forged block's version digest.
fn tamper(c: &Chain, k: usize, rng: &mut ChaCha8Rng) -> Option<(Chain, Digest)> {
    let stable = c.len().saturating_sub(k);
    let choices: Vec<usize> = (2..=stable)
        .filter(|&j| !c.get(j).expect("in range").payload.entries.is_empty())
        .collect();
    if choices.is_empty() {
        return None;
    }
    let j = choices[rng.gen_range(0..choices.len())];
    let mut t = c.clone();
    let mut b = t.get(j).expect("in range").clone();
    b.payload.entries.clear();
    let v = b.version_digest();
    t.replace(j, b).ok()?;
    Some((t, v))
}
