//! Acceptance criteria, run in order. Each prints one PASS/FAIL line on
//! standard error; the test fails if any criterion fails.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use redact_core::bench::{
    experiment_ell, experiment_no_redactions, experiment_redactions, generate_chain, BenchResult, BenchSpec,
    TrendFit, Workload,
};
use redact_core::chain::{
    default_genesis, mine_block, random_chain, validate_chain, validate_chain_ext, validate_chain_immutable,
    write_chain, Block, BlockPayload, Chain, Mode, OldState, Structural, Validator,
};
use redact_core::hashcore::{hash_h, Digest, DifficultyTarget};
use redact_core::ledger::write_ledger_chain;
use redact_core::netsim::{
    check_editable_common_prefix, double_spend_fixture, false_victim_fixture, narrative_scenario, run_simulation,
    AdversarySpec, DelayPolicy, SimConfig, SimMode, Strategy,
};
use redact_core::redaction::{
    apply_redaction, candidate_for, evaluate_policy, propose_edit, CandidateBlock, PolicyParams, PolicyVerdict,
    Ratio,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ratio(n: u64, d: u64) -> Ratio {
    Ratio::new(n, d).unwrap()
}

fn policy(k: usize, ell: usize, rho: Ratio) -> PolicyParams {
    PolicyParams::new(k, ell, rho).unwrap()
}

/// Appends one block carrying `entries` and `votes`.
fn extend(c: &mut Chain, entries: Vec<Vec<u8>>, votes: Vec<Digest>, seed: u64) {
    let parent = c.head().unwrap().clone();
    let d = *c.difficulty();
    let b = mine_block(&parent, BlockPayload::new(entries, votes), &d, u64::MAX, seed)
        .block()
        .expect("unbounded attempts");
    c.push(b);
}

// ---------------------------------------------------------------------------
// 1. Honest-world equivalence

/// Small edits that every validator must reject on an honest chain.
fn honest_mutants(c: &Chain, rng: &mut ChaCha8Rng) -> Vec<Chain> {
    let mut out = Vec::new();
    let n = c.len();
    if n < 3 {
        return out;
    }
    let j = rng.gen_range(2..=n);
    let mut m = c.clone();
    let mut b = m.get(j).unwrap().clone();
    b.payload.entries.push(b"injected".to_vec());
    m.replace(j, b).unwrap();
    out.push(m);

    let mut m = c.clone();
    let mut b = m.get(j).unwrap().clone();
    b.ctr = b.ctr.wrapping_add(1);
    m.replace(j, b).unwrap();
    out.push(m);

    let mut m = c.clone();
    let mut b = m.get(j).unwrap().clone();
    b.s.0[0] ^= 1;
    m.replace(j, b).unwrap();
    out.push(m);

    let mut blocks = c.blocks().to_vec();
    blocks.remove(rng.gen_range(1..n - 1));
    out.push(Chain::from_blocks(blocks, *c.difficulty()));
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let params = policy(6, 5, ratio(3, 5));
    let mut chains = 0;
    let mut valid = 0;
    let mut discrepancies = 0;
    for seed in 0..50u64 {
        let mut cfg = SimConfig::standard(seed);
        cfg.rounds = 100;
        cfg.edit_interval = 0;
        let trace = run_simulation(&cfg, &AdversarySpec::delay_only()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut generated: Vec<Chain> = trace.final_honest_chains().iter().map(|c| (**c).clone()).collect();
        generated.dedup_by(|a, b| a.blocks() == b.blocks());
        let target = DifficultyTarget::pow2(250);
        generated.push(random_chain(rng.gen_range(2..60), 6, &target, seed));
        let mutants: Vec<Chain> = generated.iter().flat_map(|c| honest_mutants(c, &mut rng)).collect();
        for c in generated.iter().chain(&mutants) {
            let single = validate_chain(c, &params);
            let ext = validate_chain_ext(c, &params);
            let reference = validate_chain_immutable(c, &Structural);
            chains += 1;
            valid += usize::from(reference);
            if single != reference || ext != reference {
                discrepancies += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        discrepancies == 0 && elapsed < Duration::from_secs(60),
        format!("{chains} chains ({valid} valid), {discrepancies} discrepancies, {:.1}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------
// 2-4. Validation overhead

/// Repetitions for the trend experiments.
const TREND_REPETITIONS: usize = 50;

fn overheads(results: &[BenchResult], x: impl Fn(&BenchResult) -> f64) -> (Vec<f64>, Vec<f64>) {
    results.iter().map(|r| (x(r), r.overhead_pct.unwrap_or(0.0))).unzip()
}

fn describe(results: &[BenchResult]) -> String {
    results
        .iter()
        .map(|r| format!("{}={:+.2}%", r.name, r.overhead_pct.unwrap_or(0.0)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_2(work: &Workload) -> Outcome {
    let base = BenchSpec::default();
    let r = experiment_no_redactions(&base, work).unwrap();
    let overhead = r[1].overhead_pct.unwrap();
    outcome(
        overhead <= 15.0,
        format!(
            "immutable {:.1} ms, redactable {:.1} ms, overhead {overhead:+.2}% (limit 15%)",
            r[0].mean_ms, r[1].mean_ms
        ),
    )
}

fn criterion_3(work: &Workload) -> Outcome {
    let base = BenchSpec { repetitions: TREND_REPETITIONS, ..BenchSpec::default() };
    let r = experiment_redactions(&base, &[0.02, 0.04, 0.06, 0.08, 0.10], work).unwrap();
    let (xs, ys) = overheads(&r, |r| r.redactions as f64);
    let fit = TrendFit::new(&xs, &ys).unwrap();
    let at_max = *ys.last().unwrap();
    outcome(
        fit.at_most_linear(0.2) && at_max <= 10.0,
        format!(
            "{}; slope {:.5}%/redaction, curvature ratio {:.3} (limit 0.2), overhead at 10% {at_max:+.2}% (limit 10%)",
            describe(&r[1..]),
            fit.slope,
            fit.curvature_ratio
        ),
    )
}

fn criterion_4(work: &Workload) -> Outcome {
    let base = BenchSpec { repetitions: TREND_REPETITIONS, redaction_fraction: 0.01, ..BenchSpec::default() };
    let r = experiment_ell(&base, &[5, 10, 20, 40], work).unwrap();
    let majority = r.iter().all(|r| r.spec.policy().unwrap().rho == ratio(r.spec.ell as u64 / 2 + 1, r.spec.ell as u64));
    let (xs, ys) = overheads(&r, |r| r.spec.ell as f64);
    let fit = TrendFit::new(&xs, &ys).unwrap();
    outcome(
        majority && fit.at_most_linear(0.2),
        format!(
            "{}; slope {:.4}%/block, curvature ratio {:.3} (limit 0.2)",
            describe(&r[1..]),
            fit.slope,
            fit.curvature_ratio
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Policy against a brute-force counter

/// Counts, block by block, the blocks of `c` that carry `token`.
fn brute_force_verdict(c: &Chain, token: &Digest, k: usize, ell: usize, rho: Ratio) -> PolicyVerdict {
    let carries: Vec<bool> = c.blocks().iter().map(|b| b.payload.votes.contains(token)).collect();
    let Some(first) = carries.iter().position(|&v| v) else {
        return PolicyVerdict::Voting;
    };
    // Heights are 1-based: the window covers heights first+1 ..= first+ell.
    let last_in_window = first + ell;
    if last_in_window + k > c.len() {
        return PolicyVerdict::Voting;
    }
    let count = carries[first..last_in_window].iter().filter(|&&v| v).count() as u64;
    if count * rho.den() >= rho.num() * ell as u64 {
        PolicyVerdict::Accept
    } else {
        PolicyVerdict::Reject
    }
}

fn criterion_5() -> Outcome {
    let d = DifficultyTarget::MAX;
    let mut cases = 0;
    let mut mismatches = 0;
    let mut incomplete = 0;
    let mut shallow = 0;
    for ell in 1..=6usize {
        for mask in 0u32..(1 << ell) {
            // Block 2 is the target; votes go into heights 3 ..= 2 + ell.
            let mut c = Chain::new(default_genesis(), d);
            extend(&mut c, vec![b"target".to_vec(), b"extra".to_vec()], vec![], 2);
            let original = c.get(2).unwrap().clone();
            let cand = candidate_for(&original, 2, BlockPayload::from_entries([b"target".to_vec()]), Mode::Single);
            let token = cand.digest();
            let horizon = 2 + 2 * ell + 4;
            for h in 3..=horizon {
                let bit = h - 3;
                let votes = if bit < ell && mask & (1 << bit) != 0 { vec![token] } else { vec![] };
                extend(&mut c, vec![format!("b{h}").into_bytes()], votes, h as u64);
            }
            for k in 1..=3usize {
                for t in 1..=ell as u64 {
                    let rho = ratio(t, ell as u64);
                    let params = policy(k, ell, rho);
                    for n in 3..=horizon {
                        let view = c.prune_right(horizon - n);
                        let got = evaluate_policy(&view, &cand, &params);
                        let want = brute_force_verdict(&view, &token, k, ell, rho);
                        cases += 1;
                        if got != want {
                            mismatches += 1;
                        }
                        if want == PolicyVerdict::Voting && mask != 0 {
                            let first = 3 + mask.trailing_zeros() as usize;
                            if first + ell - 1 > n {
                                incomplete += 1;
                            } else {
                                shallow += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    outcome(
        mismatches == 0 && incomplete > 0 && shallow > 0,
        format!(
            "{cases} cases, {mismatches} mismatches ({incomplete} window-incomplete and {shallow} not-k-deep voting cases)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Unapproved edits

#[derive(Clone, Copy, Debug)]
enum Tamper {
    NoVotes,
    OneShort,
    OutsideWindow,
    WrongDigest,
}

/// A chain whose block `j` was replaced by a candidate with votes placed as
/// `plan` describes. Returns the chain and whether the vote plan would have
/// been enough (the control).
fn tampered_chain(seed: u64, plan: Option<Tamper>) -> (Chain, PolicyParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=4);
    let ell = rng.gen_range(3..=6);
    let t = rng.gen_range(2..=ell as u64);
    let params = policy(k, ell, ratio(t, ell as u64));
    let threshold = params.threshold();
    let d = DifficultyTarget::pow2(252);
    let mut c = Chain::new(default_genesis(), d);
    let j = rng.gen_range(2..=5);
    while c.len() < j {
        let entries = vec![rng.gen::<[u8; 8]>().to_vec(), b"secret".to_vec()];
        extend(&mut c, entries, vec![], rng.gen());
    }
    let original = c.get(j).unwrap().clone();
    let mut payload = original.payload.clone();
    payload.entries.pop();
    let cand = candidate_for(&original, j, payload, Mode::Single);
    let token = cand.digest();
    let first = j + rng.gen_range(1..=3);
    let window: Vec<usize> = (first..first + ell).collect();
    let (heights, vote): (Vec<usize>, Digest) = match plan {
        None => (window[..threshold].to_vec(), token),
        Some(Tamper::NoVotes) => (Vec::new(), token),
        Some(Tamper::OneShort) => {
            let mut hs: Vec<usize> = window[1..].choose_multiple(&mut rng, threshold - 1).copied().collect();
            hs[0] = first;
            (hs, token)
        }
        Some(Tamper::OutsideWindow) => {
            // The first vote opens the window; the rest arrive after it closes.
            let after = first + ell;
            let mut hs = vec![first];
            hs.extend((after..after + ell).take(threshold + 1));
            (hs, token)
        }
        Some(Tamper::WrongDigest) => {
            let mut wrong = token;
            wrong.0[rng.gen_range(0..32)] ^= 1 << rng.gen_range(0..8);
            (window.clone(), wrong)
        }
    };
    let end = first + 3 * ell + 2 * k + 2;
    for h in j + 1..=end {
        let votes = if heights.contains(&h) { vec![vote] } else { vec![] };
        extend(&mut c, vec![format!("h{h}").into_bytes()], votes, rng.gen());
    }
    c.replace(j, cand.block).unwrap();
    (c, params)
}

fn criterion_6() -> Outcome {
    let kinds = [Tamper::NoVotes, Tamper::OneShort, Tamper::OutsideWindow, Tamper::WrongDigest];
    let mut rejected = 0;
    let mut total = 0;
    let mut missed = Vec::new();
    let mut controls = 0;
    for i in 0..100u64 {
        let kind = kinds[(i % 4) as usize];
        let (c, params) = tampered_chain(1000 + i, Some(kind));
        total += 1;
        if !validate_chain(&c, &params) {
            rejected += 1;
        } else {
            missed.push(format!("{kind:?}#{i}"));
        }
        let (control, params) = tampered_chain(1000 + i, None);
        controls += usize::from(validate_chain(&control, &params));
    }
    outcome(
        rejected == total && controls == 100,
        format!("{rejected}/{total} rejected, {controls}/100 approved controls accepted {missed:?}"),
    )
}

// ---------------------------------------------------------------------------
// 7. Editable common prefix

fn criterion_7() -> Outcome {
    let mut violations = 0;
    let mut min_redactions = usize::MAX;
    let mut lagging = 0;
    for seed in 0..20u64 {
        let cfg = SimConfig::standard(seed);
        assert!(cfg.rounds >= 300 && cfg.n_nodes == 10 && cfg.n_corrupt == 2);
        let trace = run_simulation(&cfg, &AdversarySpec::delay_only()).unwrap();
        let report = check_editable_common_prefix(&trace, cfg.policy.k);
        violations += report.violations;
        lagging += report.lagging;
        min_redactions = min_redactions.min(trace.redactions_in_final_chains());
    }
    let narrative: Vec<_> = (0..5).map(narrative_scenario).collect();
    let narrative_ok = narrative.iter().all(|r| r.passed());
    let n = &narrative[0];
    outcome(
        violations == 0 && min_redactions >= 3 && narrative_ok,
        format!(
            "20 runs: {violations} violations, at least {min_redactions} redactions per run, {lagging} lagging pairs excused; \
             narrative: plain violations {}, editable violations {}",
            n.plain_violations, n.editable_violations
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Malicious candidates

fn criterion_8() -> Outcome {
    let mut accepted_runs = 0;
    let mut proposed = 0;
    for seed in 0..20u64 {
        let mut cfg = SimConfig::standard(seed);
        cfg.n_corrupt = 3;
        cfg.rounds = 400;
        cfg.policy = policy(6, 30, ratio(3, 5));
        cfg.edit_interval = 0;
        cfg.scenario = "malicious-candidate".into();
        let adv = AdversarySpec::with_strategy(Strategy::MaliciousCandidate { round: 40, every: 120 });
        let trace = run_simulation(&cfg, &adv).unwrap();
        proposed += trace.malicious.len();
        if trace.honest_applications(&trace.malicious) > 0 {
            accepted_runs += 1;
        }
    }
    outcome(
        accepted_runs == 0 && proposed > 0,
        format!("mu 0.3, rho 3/5, ell 30: accepted in {accepted_runs}/20 runs ({proposed} malicious candidates)"),
    )
}

// ---------------------------------------------------------------------------
// 9. Repeated redaction of one block

const EXT_K: usize = 2;
const EXT_ELL: usize = 3;
const EXT_TARGET: usize = 3;

fn ext_params() -> PolicyParams {
    policy(EXT_K, EXT_ELL, ratio(2, 3))
}

/// Redacts block 3 three times. `skip = Some((i, keep))` leaves only `keep`
/// votes for the `i`-th redaction and applies it regardless.
fn triple_redaction(skip: Option<(usize, usize)>) -> (Chain, Vec<Digest>) {
    let params = ext_params();
    let validator = Validator::new(Mode::Ext, &params, &Structural);
    let d = DifficultyTarget::pow2(252);
    let mut c = Chain::new(default_genesis(), d);
    let mut seed = 0u64;
    let mut next = |c: &mut Chain, votes: Vec<Digest>| {
        seed += 1;
        extend(c, vec![format!("filler{seed}").into_bytes()], votes, seed);
    };
    while c.len() < EXT_TARGET - 1 {
        next(&mut c, vec![]);
    }
    let entries: Vec<Vec<u8>> = (0..4).map(|i| format!("entry{i}").into_bytes()).collect();
    extend(&mut c, entries, vec![], 99);
    for _ in 0..EXT_K {
        next(&mut c, vec![]);
    }
    let mut tokens = Vec::new();
    for round in 0..3 {
        let mut payload = c.get(EXT_TARGET).unwrap().payload.clone();
        payload.entries.pop();
        let cand: CandidateBlock = propose_edit(&c, EXT_TARGET, payload, EXT_K, Mode::Ext).unwrap();
        let token = cand.digest();
        tokens.push(token);
        let keep = match skip {
            Some((i, keep)) if i == round => keep,
            _ => EXT_ELL,
        };
        for v in 0..EXT_ELL {
            next(&mut c, if v < keep { vec![token] } else { vec![] });
        }
        for _ in 0..EXT_K {
            next(&mut c, vec![]);
        }
        c = match apply_redaction(&c, &cand, &validator) {
            Ok(edited) => edited,
            Err(_) => {
                let mut forced = c.clone();
                forced.replace(EXT_TARGET, cand.block).unwrap();
                forced
            }
        };
    }
    next(&mut c, vec![]);
    (c, tokens)
}

fn with_target(c: &Chain, f: impl FnOnce(&mut Block)) -> Chain {
    let mut m = c.clone();
    let mut b = m.get(EXT_TARGET).unwrap().clone();
    f(&mut b);
    m.replace(EXT_TARGET, b).unwrap();
    m
}

fn criterion_9() -> Outcome {
    let params = ext_params();
    let (c, tokens) = triple_redaction(None);
    let block = c.get(EXT_TARGET).unwrap();
    let segments = block.y.segments().to_vec();
    let base_ok = validate_chain_ext(&c, &params) && segments.len() == 3 && block.payload.entries.len() == 1;

    let mut fixtures: Vec<(String, Chain)> = Vec::new();
    // Mutate each historical segment in three places.
    for i in 0..segments.len() {
        for (byte, bit) in [(0usize, 0u8), (13, 5), (31, 7)] {
            let m = with_target(&c, |b| b.y.segments_mut()[i].0[byte] ^= 1 << bit);
            fixtures.push((format!("segment {i} byte {byte}"), m));
        }
    }
    // Rebuild with a redaction's votes missing or one short.
    for i in 0..3 {
        fixtures.push((format!("votes of edit {i} erased"), triple_redaction(Some((i, 0))).0));
        fixtures.push((format!("votes of edit {i} one short"), triple_redaction(Some((i, 1))).0));
    }
    // Strip votes from the blocks that carry them.
    for (i, token) in tokens.iter().enumerate() {
        let carriers: Vec<usize> =
            (1..=c.len()).filter(|&h| c.get(h).unwrap().payload.votes.contains(token)).collect();
        let mut m = c.clone();
        let mut b = m.get(carriers[0]).unwrap().clone();
        b.payload.votes.retain(|v| v != token);
        m.replace(carriers[0], b).unwrap();
        fixtures.push((format!("first vote of edit {i} stripped"), m));
        let mut m = c.clone();
        for &h in &carriers {
            let mut b = m.get(h).unwrap().clone();
            b.payload.votes.clear();
            m.replace(h, b).unwrap();
        }
        fixtures.push((format!("all votes of edit {i} stripped"), m));
    }
    // Every non-identity order of the three segments.
    for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let order: Vec<Digest> = perm.iter().map(|&p| segments[p]).collect();
        let m = with_target(&c, |b| b.y = OldState::from_segments(order).unwrap());
        fixtures.push((format!("segments ordered {perm:?}"), m));
    }
    // Dropped or duplicated history.
    for drop in 0..3 {
        let mut s = segments.clone();
        s.remove(drop);
        fixtures.push((format!("segment {drop} dropped"), with_target(&c, |b| b.y = OldState::from_segments(s).unwrap())));
    }
    let mut dup = segments.clone();
    dup.insert(1, segments[1]);
    fixtures.push(("segment 1 duplicated".into(), with_target(&c, |b| b.y = OldState::from_segments(dup).unwrap())));

    let missed: Vec<&String> = fixtures.iter().filter(|(_, m)| validate_chain_ext(m, &params)).map(|(n, _)| n).collect();
    let detected = fixtures.len() - missed.len();
    outcome(
        base_ok && fixtures.len() == 30 && missed.is_empty(),
        format!(
            "thrice-redacted chain valid: {base_ok}; {detected}/{} mutations detected {missed:?}",
            fixtures.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Ledger accountability and double spends

fn criterion_10() -> Outcome {
    let mut genuine = 0;
    let mut forged_total = 0;
    let mut forged_accepted = 0;
    let mut witness = 0;
    for seed in 0..200u64 {
        let o = false_victim_fixture(seed);
        genuine += usize::from(o.genuine_accepted);
        forged_total += o.forged_total;
        forged_accepted += o.forged_accepted;
        witness += usize::from(o.witness_ok);
    }
    let mut double_spend_rejected = 0;
    let mut failures = Vec::new();
    for seed in 0..50u64 {
        match double_spend_fixture(seed) {
            Ok(()) => double_spend_rejected += 1,
            Err(e) => failures.push(e),
        }
    }
    let tpr = genuine as f64 / 200.0;
    let fpr = forged_accepted as f64 / forged_total.max(1) as f64;
    outcome(
        genuine == 200 && forged_accepted == 0 && forged_total > 0 && witness == 200 && double_spend_rejected == 50,
        format!(
            "TPR {:.0}% (200 claims), FPR {:.0}% ({forged_total} forged claims), witnesses {witness}/200, \
             double spends rejected {double_spend_rejected}/50 {failures:?}",
            100.0 * tpr,
            100.0 * fpr
        ),
    )
}

// ---------------------------------------------------------------------------
// 11. Determinism

fn small_sim(seed: u64, mode: SimMode, adv: AdversarySpec, nodes: usize) -> Vec<u8> {
    let mut cfg = SimConfig::standard(seed);
    cfg.rounds = 120;
    cfg.mode = mode;
    cfg.n_nodes = nodes;
    cfg.n_corrupt = nodes / 5;
    cfg.edit_start = 20;
    cfg.edit_interval = 25;
    cfg.calibrate(0.2);
    run_simulation(&cfg, &adv).unwrap().to_jsonl()
}

fn ledger_dump(spec: BenchSpec) -> Vec<u8> {
    let work = Workload::new(spec.n_blocks, spec.tx_per_block, spec.seed);
    let mut out = Vec::new();
    write_ledger_chain(&mut out, &generate_chain(&spec, &work).unwrap()).unwrap();
    out
}

fn criterion_11() -> Outcome {
    let delay_max = AdversarySpec { delay: DelayPolicy::Max, ..Default::default() };
    let malicious = AdversarySpec::with_strategy(Strategy::MaliciousCandidate { round: 20, every: 40 });
    let tampering = AdversarySpec::with_strategy(Strategy::UnapprovedEdit { round: 30 });
    let bench = |f: f64, k: usize, ell: usize, seed: u64| BenchSpec {
        n_blocks: 80,
        tx_per_block: 6,
        redaction_fraction: f,
        k,
        ell,
        seed,
        ..Default::default()
    };
    type Job = Box<dyn Fn() -> Vec<u8>>;
    let jobs: Vec<(&str, Job)> = vec![
        ("sim single", Box::new(|| small_sim(1, SimMode::Single, AdversarySpec::delay_only(), 10))),
        ("sim ext", Box::new(|| small_sim(2, SimMode::Ext, AdversarySpec::delay_only(), 10))),
        ("sim ledger", Box::new(|| small_sim(3, SimMode::Ledger, AdversarySpec::delay_only(), 6))),
        ("sim max delay", Box::new(move || small_sim(4, SimMode::Single, delay_max.clone(), 5))),
        ("sim malicious", Box::new(move || small_sim(5, SimMode::Single, malicious.clone(), 10))),
        ("sim tampering", Box::new(move || small_sim(6, SimMode::Single, tampering.clone(), 10))),
        ("ledger chain", Box::new(move || ledger_dump(bench(0.0, 6, 5, 7)))),
        ("ledger chain redacted", Box::new(move || ledger_dump(bench(0.1, 2, 3, 8)))),
        ("ledger chain long window", Box::new(move || ledger_dump(bench(0.05, 3, 8, 9)))),
        (
            "random chain",
            Box::new(|| {
                let mut out = Vec::new();
                let c = random_chain(200, 5, &DifficultyTarget::pow2(250), 10);
                write_chain(&mut out, &c, Mode::Single).unwrap();
                out
            }),
        ),
    ];
    let mut differing = Vec::new();
    let mut digests = Vec::new();
    for (name, job) in &jobs {
        let (a, b) = (job(), job());
        let (da, db) = (hash_h(&[&a]), hash_h(&[&b]));
        if da != db || a.is_empty() {
            differing.push(*name);
        }
        digests.push(format!("{name}={}", &da.to_hex()[..12]));
    }
    outcome(
        differing.is_empty() && jobs.len() == 10,
        format!("{}/10 configs identical {differing:?}; {}", 10 - differing.len(), digests.join(" ")),
    )
}

// ---------------------------------------------------------------------------

fn report(line: &str) {
    // Written directly so that the line shows even when output is captured.
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

#[test]
fn acceptance_criteria() {
    let work = Workload::new(2000, 100, BenchSpec::default().seed);
    let criteria: Vec<Criterion> = vec![
        ("honest-world equivalence", Box::new(criterion_1)),
        ("overhead without redactions", Box::new(|| criterion_2(&work))),
        ("overhead against redactions", Box::new(|| criterion_3(&work))),
        ("overhead against voting period", Box::new(|| criterion_4(&work))),
        ("policy against brute force", Box::new(criterion_5)),
        ("unapproved edits rejected", Box::new(criterion_6)),
        ("editable common prefix", Box::new(criterion_7)),
        ("malicious candidates never accepted", Box::new(criterion_8)),
        ("repeated redaction history", Box::new(criterion_9)),
        ("ledger accountability and double spends", Box::new(criterion_10)),
        ("determinism", Box::new(criterion_11)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        report(&format!(
            "criterion {:>2} {verdict}: {name}: {} [{:.1}s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        ));
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
