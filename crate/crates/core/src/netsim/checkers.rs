//! Empirical checks of chain growth, chain quality, editable common prefix
//! and liveness over simulation traces, plus a delivery audit.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Observation, SimTrace};
use crate::chain::Chain;
use crate::hashcore::{hash_h, Digest};
use crate::redaction::{PolicyEvaluator, PolicyParams, PolicyVerdict, VoteIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub tau: f64,
    pub s: u64,
    pub windows: usize,
    pub min_rate: f64,
    pub violations: usize,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// For every round `r`, compares the shortest honest chain at `r + s` with
/// the longest honest chain at `r`.
pub fn check_chain_growth(trace: &SimTrace, tau: f64, s: u64) -> GrowthReport {
    let s = s.max(1);
    let honest_lens = |r: usize| -> (Option<usize>, Option<usize>) {
        let lens = trace.rounds[r].nodes.iter().filter(|n| n.honest).map(|n| n.len);
        (lens.clone().min(), lens.max())
    };
    let mut report = GrowthReport { tau, s, windows: 0, min_rate: f64::INFINITY, violations: 0 };
    let n = trace.rounds.len();
    for r in 0..n.saturating_sub(s as usize) {
        let (_, Some(max_then)) = honest_lens(r) else { continue };
        let (Some(min_later), _) = honest_lens(r + s as usize) else { continue };
        let grown = min_later as f64 - max_then as f64;
        report.windows += 1;
        report.min_rate = report.min_rate.min(grown / s as f64);
        if grown < tau * s as f64 {
            report.violations += 1;
        }
    }
    if report.windows == 0 {
        report.min_rate = 0.0;
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mu: f64,
    pub ell: usize,
    pub windows: usize,
    pub max_ratio: f64,
    pub violations: usize,
}

impl QualityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Scans every `ell`-block window of every final honest chain for the share
/// of blocks mined by corrupted parties. Genesis is not counted.
pub fn check_chain_quality(trace: &SimTrace, mu: f64, ell: usize) -> QualityReport {
    let ell = ell.max(1);
    let mut report = QualityReport { mu, ell, windows: 0, max_ratio: 0.0, violations: 0 };
    for c in trace.final_honest_chains() {
        let flags: Vec<bool> = c.blocks()[1..]
            .iter()
            .map(|b| trace.provenance.get(&b.identity()).is_some_and(|p| p.corrupt))
            .collect();
        for w in flags.windows(ell) {
            let ratio = w.iter().filter(|&&f| f).count() as f64 / ell as f64;
            report.windows += 1;
            report.max_ratio = report.max_ratio.max(ratio);
            if ratio > mu {
                report.violations += 1;
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixViolation {
    pub node1: usize,
    pub round1: u64,
    pub node2: usize,
    pub round2: u64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixReport {
    pub k: usize,
    pub editable: bool,
    pub pairs: usize,
    pub violations: usize,
    /// The first few violations, for diagnosis.
    pub examples: Vec<PrefixViolation>,
    /// Pairs excused because the later view had not applied an edit the
    /// earlier view had accepted.
    pub lagging: usize,
}

impl PrefixReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

const MAX_EXAMPLES: usize = 16;

struct Summary {
    chain: Arc<Chain>,
    ids: Vec<Digest>,
    versions: Vec<Digest>,
    /// `id_prefix[i]` folds the identities of blocks `1..=i`.
    id_prefix: Vec<Digest>,
    ver_prefix: Vec<Digest>,
    redacted: Vec<usize>,
    accepted: HashSet<usize>,
    first: (usize, u64),
    last_round: u64,
}

fn fold(acc: &Digest, d: &Digest) -> Digest {
    hash_h(&[acc.as_ref(), d.as_ref()])
}

impl Summary {
    fn new(chain: Arc<Chain>, params: &PolicyParams, first: (usize, u64)) -> Self {
        let ids: Vec<Digest> = chain.blocks().iter().map(|b| b.identity()).collect();
        let versions: Vec<Digest> = chain.blocks().iter().map(|b| b.version_digest()).collect();
        let mut id_prefix = vec![Digest::ZERO];
        let mut ver_prefix = vec![Digest::ZERO];
        for (i, v) in ids.iter().zip(&versions) {
            id_prefix.push(fold(id_prefix.last().expect("non-empty"), i));
            ver_prefix.push(fold(ver_prefix.last().expect("non-empty"), v));
        }
        let redacted: Vec<usize> = (1..=chain.len())
            .filter(|&h| !chain.get(h).expect("in range").is_unredacted())
            .collect();
        let accepted = if redacted.is_empty() {
            HashSet::new()
        } else {
            let votes = VoteIndex::build(&chain);
            redacted
                .iter()
                .copied()
                .filter(|&h| {
                    let token = chain.get(h).expect("in range").link_digest();
                    params.evaluate(&chain, &votes, &token) == PolicyVerdict::Accept
                })
                .collect()
        };
        Summary {
            chain,
            ids,
            versions,
            id_prefix,
            ver_prefix,
            redacted,
            accepted,
            first,
            last_round: first.1,
        }
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

enum PairOutcome {
    Ok,
    Lagging,
    Violation(usize),
}

fn first_divergence(a: &[Digest], b: &[Digest], m: usize) -> usize {
    // Smallest i in 1..=m with a[i] != b[i]; prefix folds are monotone.
    let (mut lo, mut hi) = (1, m);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if a[mid] == b[mid] {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

fn check_pair(c1: &Summary, c2: &Summary, k: usize, editable: bool) -> PairOutcome {
    let m = c1.len().saturating_sub(k);
    if m == 0 {
        return PairOutcome::Ok;
    }
    if m > c2.len() {
        return PairOutcome::Violation(c2.len() + 1);
    }
    if c1.ver_prefix[m] == c2.ver_prefix[m] {
        return PairOutcome::Ok;
    }
    if !editable || c1.id_prefix[m] != c2.id_prefix[m] {
        let (a, b) = if editable { (&c1.id_prefix, &c2.id_prefix) } else { (&c1.ver_prefix, &c2.ver_prefix) };
        return PairOutcome::Violation(first_divergence(a, b, m));
    }
    let mut positions: Vec<usize> = c1.redacted.iter().chain(&c2.redacted).copied().filter(|&p| p <= m).collect();
    positions.sort_unstable();
    positions.dedup();
    let mut lagging = false;
    for p in positions {
        if c1.versions[p - 1] == c2.versions[p - 1] {
            continue;
        }
        if c2.accepted.contains(&p) {
            continue;
        }
        // The later view has not caught up with an edit the earlier view
        // accepted: its block is an older version of the same block.
        let b1 = c1.chain.get(p).expect("in range");
        let b2 = c2.chain.get(p).expect("in range");
        if c1.accepted.contains(&p) && b1.y.segments().starts_with(b2.y.segments()) {
            lagging = true;
            continue;
        }
        return PairOutcome::Violation(p);
    }
    if lagging {
        PairOutcome::Lagging
    } else {
        PairOutcome::Ok
    }
}

fn summarize(views: &[Observation], params: &PolicyParams) -> Vec<Summary> {
    let mut by_ptr: HashMap<*const Chain, usize> = HashMap::new();
    let mut out: Vec<Summary> = Vec::new();
    for o in views.iter().filter(|o| o.honest) {
        let key = Arc::as_ptr(&o.chain);
        match by_ptr.get(&key) {
            Some(&i) => {
                let s = &mut out[i];
                s.last_round = s.last_round.max(o.round);
                if o.round < s.first.1 {
                    s.first = (o.node, o.round);
                }
            }
            None => {
                by_ptr.insert(key, out.len());
                out.push(Summary::new(Arc::clone(&o.chain), params, (o.node, o.round)));
            }
        }
    }
    out
}

fn prefix_check(views: &[Observation], params: &PolicyParams, k: usize, editable: bool) -> PrefixReport {
    let summaries = summarize(views, params);
    let mut report = PrefixReport { k, editable, pairs: 0, violations: 0, examples: Vec::new(), lagging: 0 };
    for c1 in &summaries {
        for c2 in &summaries {
            // Some view of c1 must precede (or coincide with) some view of c2.
            if c1.first.1 > c2.last_round {
                continue;
            }
            report.pairs += 1;
            match check_pair(c1, c2, k, editable) {
                PairOutcome::Ok => {}
                PairOutcome::Lagging => report.lagging += 1,
                PairOutcome::Violation(index) => {
                    report.violations += 1;
                    if report.examples.len() < MAX_EXAMPLES {
                        let later = views
                            .iter()
                            .find(|o| o.honest && Arc::ptr_eq(&o.chain, &c2.chain) && o.round >= c1.first.1)
                            .expect("c2 is held at or after c1's first round");
                        report.examples.push(PrefixViolation {
                            node1: c1.first.0,
                            round1: c1.first.1,
                            node2: later.node,
                            round2: later.round,
                            index,
                        });
                    }
                }
            }
        }
    }
    report
}

/// Editable common prefix over arbitrary honest observations.
pub fn check_editable_common_prefix_views(views: &[Observation], params: &PolicyParams, k: usize) -> PrefixReport {
    prefix_check(views, params, k, true)
}

/// Plain common prefix: pruned earlier chains must be prefixes of later ones.
pub fn check_plain_common_prefix_views(views: &[Observation], params: &PolicyParams, k: usize) -> PrefixReport {
    prefix_check(views, params, k, false)
}

pub fn check_editable_common_prefix(trace: &SimTrace, k: usize) -> PrefixReport {
    check_editable_common_prefix_views(&trace.observations, &trace.config.policy, k)
}

pub fn check_plain_common_prefix(trace: &SimTrace, k: usize) -> PrefixReport {
    check_plain_common_prefix_views(&trace.observations, &trace.config.policy, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LivenessReport {
    pub k: usize,
    pub entries: usize,
    pub confirmed: usize,
    /// Entries never k-deep in every honest chain by the end of the run.
    pub pending_at_end: usize,
    /// Largest confirmation delay observed, in rounds.
    pub max_u: u64,
    pub mean_u: f64,
}

/// Rounds until each environment entry is at least `k` blocks deep in every
/// honest chain at once.
pub fn check_liveness(trace: &SimTrace, k: usize) -> LivenessReport {
    let mut per_round: BTreeMap<u64, Vec<&Observation>> = BTreeMap::new();
    for o in trace.observations.iter().filter(|o| o.honest) {
        per_round.entry(o.round).or_default().push(o);
    }
    let mut depth_cache: HashMap<*const Chain, HashMap<&[u8], usize>> = HashMap::new();
    for o in trace.observations.iter().filter(|o| o.honest) {
        depth_cache.entry(Arc::as_ptr(&o.chain)).or_insert_with(|| {
            let mut m = HashMap::new();
            for (h, b) in o.chain.blocks().iter().enumerate() {
                for e in &b.payload.entries {
                    m.entry(e.as_slice()).or_insert(h + 1);
                }
            }
            m
        });
    }
    let mut report = LivenessReport {
        k,
        entries: trace.environment.len(),
        confirmed: 0,
        pending_at_end: 0,
        max_u: 0,
        mean_u: 0.0,
    };
    let mut total = 0u64;
    for (given, entry) in &trace.environment {
        let found = per_round.range(given..).find(|(_, obs)| {
            obs.iter().all(|o| {
                let stable = o.chain.len().saturating_sub(k);
                depth_cache[&Arc::as_ptr(&o.chain)].get(entry.as_slice()).is_some_and(|&h| h <= stable)
            })
        });
        match found {
            Some((r, _)) => {
                let u = r - given;
                report.confirmed += 1;
                report.max_u = report.max_u.max(u);
                total += u;
            }
            None => report.pending_at_end += 1,
        }
    }
    if report.confirmed > 0 {
        report.mean_u = total as f64 / report.confirmed as f64;
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryAudit {
    pub broadcasts: usize,
    pub deliveries: usize,
    pub max_delay: u64,
    /// Honest broadcasts not delivered to some node within Δ rounds (only
    /// counted when the run lasted long enough).
    pub late: usize,
    /// Deliveries whose content digest differs from the broadcast.
    pub altered: usize,
}

impl DeliveryAudit {
    pub fn passed(&self) -> bool {
        self.late == 0 && self.altered == 0
    }
}

pub fn audit_delivery(trace: &SimTrace) -> DeliveryAudit {
    let delta = trace.config.max_delay;
    let last = trace.config.rounds;
    let mut sent: HashMap<u64, (u64, bool, Digest, usize)> = HashMap::new();
    let mut audit = DeliveryAudit { broadcasts: 0, deliveries: 0, max_delay: 0, late: 0, altered: 0 };
    let mut received: HashMap<(u64, usize), u64> = HashMap::new();
    for r in &trace.rounds {
        for b in &r.broadcasts {
            audit.broadcasts += 1;
            sent.insert(b.id, (r.round, b.honest, b.digest, b.from));
        }
        for d in &r.deliveries {
            audit.deliveries += 1;
            let (at, _, digest, _) = sent[&d.id];
            if d.digest != digest {
                audit.altered += 1;
            }
            audit.max_delay = audit.max_delay.max(r.round - at);
            received.insert((d.id, d.to), r.round);
        }
    }
    let n = trace.config.n_nodes;
    for (id, (at, honest, _, from)) in &sent {
        if !honest || at + delta > last {
            continue;
        }
        for to in (0..n).filter(|t| t != from) {
            if received.get(&(*id, to)).is_none_or(|r| r - at > delta) {
                audit.late += 1;
            }
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashcore::DifficultyTarget;
    use crate::netsim::{run_simulation, AdversarySpec, SimConfig};

    fn honest(seed: u64) -> SimConfig {
        let mut cfg = SimConfig::standard(seed);
        cfg.n_nodes = 5;
        cfg.n_corrupt = 0;
        cfg.max_delay = 1;
        cfg.rounds = 120;
        cfg.edit_start = 30;
        cfg.edit_interval = 30;
        cfg.calibrate(0.2);
        cfg
    }

    #[test]
    fn honest_world_sanity() {
        let cfg = honest(11);
        let t = run_simulation(&cfg, &AdversarySpec::delay_only()).unwrap();
        assert!(check_editable_common_prefix(&t, cfg.policy.k).passed());
        assert!(check_chain_growth(&t, 0.02, 30).passed());
        let q = check_chain_quality(&t, 0.0, 5);
        assert_eq!(q.max_ratio, 0.0);
        assert!(audit_delivery(&t).passed());
        assert!(audit_delivery(&t).max_delay <= 1);
        let live = check_liveness(&t, cfg.policy.k);
        assert!(live.confirmed > 0);
    }

    #[test]
    fn growth_zero_at_impossible_difficulty() {
        let mut cfg = honest(1);
        cfg.difficulty = DifficultyTarget::one();
        cfg.rounds = 20;
        let t = run_simulation(&cfg, &AdversarySpec::delay_only()).unwrap();
        let g = check_chain_growth(&t, 0.1, 5);
        assert_eq!(g.min_rate, 0.0);
        assert!(!g.passed());
    }

    #[test]
    fn solo_miner_grows_one_per_round() {
        let mut cfg = honest(1);
        cfg.n_nodes = 1;
        cfg.difficulty = DifficultyTarget::MAX;
        cfg.rounds = 30;
        let t = run_simulation(&cfg, &AdversarySpec::delay_only()).unwrap();
        let g = check_chain_growth(&t, 1.0, 5);
        assert_eq!(g.min_rate, 1.0);
        assert!(g.passed());
    }

    #[test]
    fn all_corrupt_quality_is_one() {
        let mut cfg = honest(2);
        cfg.n_corrupt = 0;
        cfg.rounds = 60;
        let mut t = run_simulation(&cfg, &AdversarySpec::delay_only()).unwrap();
        for p in t.provenance.values_mut() {
            p.corrupt = true;
        }
        assert_eq!(check_chain_quality(&t, 0.5, 3).max_ratio, 1.0);
    }

    #[test]
    fn injected_unapproved_edit_is_flagged() {
        let cfg = honest(4);
        let mut t = run_simulation(&cfg, &AdversarySpec::delay_only()).unwrap();
        let last = t.observations.iter().rposition(|o| o.honest).unwrap();
        let mut c = (*t.observations[last].chain).clone();
        let j = (2..c.len() - cfg.policy.k).find(|&j| !c.get(j).unwrap().payload.entries.is_empty()).unwrap();
        let mut b = c.get(j).unwrap().clone();
        b.payload.entries.clear();
        c.replace(j, b).unwrap();
        t.observations[last].chain = Arc::new(c);
        let r = check_editable_common_prefix(&t, cfg.policy.k);
        assert!(r.violations > 0);
        assert!(r.examples.iter().any(|v| v.index == j));
    }
}
