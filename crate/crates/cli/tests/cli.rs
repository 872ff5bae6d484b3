use std::path::Path;
use std::process::{Command, Output};

use redact_core::bench::{generate_chain, redaction_targets, BenchSpec, Workload};
use redact_core::ledger::write_ledger_chain;

fn redact(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redact"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const POLICY: [&str; 6] = ["--k", "2", "--ell", "3", "--rho", "2/3"];

fn with_policy<'a>(args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(POLICY);
    v
}

/// A chain of 5 blocks whose block 2 holds entries `keep` and `secret`.
fn seeded_chain(dir: &Path) {
    assert_eq!(code(&redact(dir, &with_policy(&["init", "--chain", "c.jsonl"]))), 0);
    let o = redact(dir, &with_policy(&["mine", "--chain", "c.jsonl", "--entry", "keep", "--entry", "secret"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = redact(dir, &with_policy(&["mine", "--chain", "c.jsonl", "--blocks", "3"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn edit_lifecycle_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    seeded_chain(d);
    let o = redact(d, &with_policy(&["propose-edit", "--chain", "c.jsonl", "--pool", "p.jsonl", "--index", "2", "--drop", "1"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let digest = stdout(&o).trim().to_string();
    assert_eq!(digest.len(), 64);

    let o = redact(d, &with_policy(&["vote-status", "--chain", "c.jsonl", "--pool", "p.jsonl"]));
    let status: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(status["digest"], digest.as_str());
    assert_eq!(status["verdict"], "voting");

    let o = redact(d, &with_policy(&["mine", "--chain", "c.jsonl", "--pool", "p.jsonl", "--blocks", "6"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("\"event\":\"applied\""), "{}", stdout(&o));

    let o = redact(d, &with_policy(&["validate", "--chain", "c.jsonl"]));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("1 redacted"));

    // The same dump needs 3 of 3 votes under a stricter threshold, but with
    // a longer window the vote is not over yet.
    let o = redact(d, &["validate", "--chain", "c.jsonl", "--k", "2", "--ell", "5", "--rho", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("height 2"), "{}", stderr(&o));
}

#[test]
fn unapproved_edit_is_reported_with_its_height() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    seeded_chain(d);
    let text = std::fs::read_to_string(d.join("c.jsonl")).unwrap();
    let mut lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    lines[2]["payload"]["entries_hex"] = serde_json::json!([hex::encode("keep")]);
    let edited: Vec<String> = lines.iter().map(|v| v.to_string()).collect();
    std::fs::write(d.join("bad.jsonl"), edited.join("\n") + "\n").unwrap();
    let o = redact(d, &with_policy(&["validate", "--chain", "bad.jsonl"]));
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("height 2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&redact(d, &["validate", "--chain", "missing.jsonl"])), 2);
    assert_eq!(code(&redact(d, &["validate", "--nonsense"])), 2);
    assert_eq!(code(&redact(d, &["attack", "--scenario", "no-such"])), 2);
    assert_eq!(code(&redact(d, &["init", "--chain", "c.jsonl", "--rho", "1.5"])), 2);
}

#[test]
fn proposal_on_unstable_block_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    seeded_chain(d);
    let o = redact(d, &with_policy(&["propose-edit", "--chain", "c.jsonl", "--pool", "p.jsonl", "--index", "5", "--entry", "x"]));
    assert_eq!(code(&o), 1);
    assert!(!d.join("p.jsonl").exists() || std::fs::read_to_string(d.join("p.jsonl")).unwrap().is_empty());
}

#[test]
fn config_file_round_trips_through_init() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = redact(d, &["init", "--chain", "c.jsonl", "--k", "3", "--ell", "4", "--rho", "0.75", "--mode", "ext", "--config-out", "cfg.toml"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = std::fs::read_to_string(d.join("cfg.toml")).unwrap();
    assert!(cfg.contains("k = 3") && cfg.contains("ell = 4") && cfg.contains("\"3/4\"") && cfg.contains("\"ext\""));
    let header = std::fs::read_to_string(d.join("c.jsonl")).unwrap();
    assert!(header.contains("\"mode\":\"ext\""));
    let o = redact(d, &["mine", "--config", "cfg.toml", "--chain", "c.jsonl", "--blocks", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&redact(d, &["validate", "--config", "cfg.toml", "--chain", "c.jsonl"])), 0);
}

#[test]
fn bench_writes_the_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = redact(d, &["bench", "--blocks", "60", "--tx", "5", "--redact", "0.05", "--k", "2", "--ell", "3", "--reps", "2", "--out", "r.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("r.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    for col in ["mean_ms", "stddev_ms", "overhead_pct", "baseline_name"] {
        assert!(header.contains(col), "{header}");
    }
    assert_eq!(lines.count(), 3);
}

#[test]
fn bench_against_a_named_baseline_dump() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = ["--blocks", "60", "--tx", "5", "--k", "2", "--ell", "3"];
    let mut a = vec!["generate", "--out", "base.jsonl"];
    a.extend(common);
    assert_eq!(code(&redact(d, &a)), 0);
    let mut a = vec!["generate", "--out", "red.jsonl", "--redact", "0.1"];
    a.extend(common);
    assert_eq!(code(&redact(d, &a)), 0);
    let mut a = vec!["bench", "--chain", "red.jsonl", "--baseline", "base.jsonl", "--reps", "2"];
    a.extend(["--k", "2", "--ell", "3"]);
    let o = redact(d, &a);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let row = out.lines().nth(2).unwrap();
    assert!(row.starts_with("red.jsonl,") && row.ends_with(",base.jsonl"), "{row}");
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a.jsonl", "b.jsonl"] {
        let o = redact(d, &["generate", "--out", out, "--blocks", "50", "--tx", "4", "--redact", "0.04", "--k", "2", "--ell", "3"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(d.join("a.jsonl")).unwrap(), std::fs::read(d.join("b.jsonl")).unwrap());
    assert_eq!(code(&redact(d, &["validate", "--chain", "a.jsonl", "--k", "2", "--ell", "3", "--check-sigs"])), 0);
}

#[test]
fn verify_claim_accepts_only_the_removed_transaction() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = BenchSpec { n_blocks: 60, tx_per_block: 5, redaction_fraction: 0.05, k: 2, ell: 3, ..Default::default() };
    let work = Workload::new(spec.n_blocks, spec.tx_per_block, spec.seed);
    let chain = generate_chain(&spec, &work).unwrap();
    let mut buf = Vec::new();
    write_ledger_chain(&mut buf, &chain).unwrap();
    std::fs::write(d.join("l.jsonl"), buf).unwrap();

    let (height, lane) = redaction_targets(&spec)[0];
    let old = work.transfer(height, lane).unwrap();
    let (h, slot) = (height.to_string(), (lane + 1).to_string());
    let genuine = hex::encode(old.to_bytes());
    let o = redact(d, &["verify-claim", "--chain", "l.jsonl", "--height", &h, "--tx-index", &slot, "--claim-hex", &genuine]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let other = hex::encode(work.transfer(height, (lane + 1) % 4).unwrap().to_bytes());
    let o = redact(d, &["verify-claim", "--chain", "l.jsonl", "--height", &h, "--tx-index", &slot, "--claim-hex", &other]);
    assert_eq!(code(&o), 1);

    std::fs::write(d.join("claim.bin"), old.to_bytes()).unwrap();
    let o = redact(d, &["verify-claim", "--chain", "l.jsonl", "--height", "3", "--tx-index", "0", "--claim-file", "claim.bin"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_reports_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["simulate", "--seed", "3", "--rounds", "120", "--edit-start", "20", "--edit-interval", "30", "--out", "t.jsonl", "--report", "r.json"];
    let o = redact(d, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["editable_common_prefix"]["violations"], 0);
    assert!(report["delivery"]["late"] == 0);
    let first = std::fs::read(d.join("t.jsonl")).unwrap();
    let trace = String::from_utf8(first.clone()).unwrap();
    assert_eq!(trace.lines().count(), 121);

    // The trace header doubles as a simulation config.
    std::fs::write(d.join("cfg.json"), trace.lines().next().unwrap()).unwrap();
    let o = redact(d, &["simulate", "--sim-config", "cfg.json", "--out", "t2.jsonl", "--report", "r2.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(d.join("t2.jsonl")).unwrap(), first);
}

#[test]
fn attack_scenario_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = redact(dir.path(), &["attack", "--scenario", "false-victim"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["scenario"], "false-victim");
    assert_eq!(report["passes"], 20);
}
