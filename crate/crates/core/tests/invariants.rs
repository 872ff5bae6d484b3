use proptest::prelude::*;

use redact_core::chain::{
    default_genesis, mine_block, random_chain, read_chain, validate_chain, validate_chain_ext, validate_chain_immutable,
    write_chain, BlockPayload, Chain, Mode, Structural, Validator,
};
use redact_core::hashcore::{Digest, DifficultyTarget};
use redact_core::ledger::{validate_candidate_tx, OutPoint, OutputKind, Transaction, TxInput, TxOutput};
use redact_core::redaction::{apply_redaction, propose_edit, PolicyParams, PolicyVerdict, Ratio};

fn params(k: usize, ell: usize, t: u64) -> PolicyParams {
    PolicyParams::new(k, ell, Ratio::new(t, ell as u64).unwrap()).unwrap()
}

fn extend(c: &mut Chain, entries: Vec<Vec<u8>>, votes: Vec<Digest>, seed: u64) {
    let parent = c.head().unwrap().clone();
    let d = *c.difficulty();
    c.push(mine_block(&parent, BlockPayload::new(entries, votes), &d, u64::MAX, seed).block().unwrap());
}

/// Chain of `len` blocks, then an edit of block `j` dropping its last entry,
/// voted on in `votes` of the ℓ window blocks and buried k deep.
fn voted_edit(len: usize, j: usize, votes: usize, p: &PolicyParams, mode: Mode, seed: u64) -> (Chain, Option<Chain>) {
    let mut c = random_chain(len, 4, &DifficultyTarget::MAX, seed);
    let mut entries = c.get(j).unwrap().payload.entries.clone();
    entries.push(b"to-remove".to_vec());
    // Re-mine from j on so that block j has an entry to drop.
    let mut rebuilt = c.prune_right(c.len() - (j - 1));
    extend(&mut rebuilt, entries, vec![], seed);
    for h in j + 1..=len {
        extend(&mut rebuilt, c.get(h).unwrap().payload.entries.clone(), vec![], seed ^ h as u64);
    }
    c = rebuilt;
    while c.len() < j + p.k {
        let s = seed.wrapping_add(c.len() as u64);
        extend(&mut c, vec![], vec![], s);
    }
    let mut payload = c.get(j).unwrap().payload.clone();
    payload.entries.pop();
    let cand = propose_edit(&c, j, payload, p.k, mode).unwrap();
    for i in 0..p.ell {
        let v = if i < votes { vec![cand.digest()] } else { vec![] };
        extend(&mut c, vec![], v, seed.wrapping_add(1000 + i as u64));
    }
    for i in 0..p.k {
        extend(&mut c, vec![], vec![], seed.wrapping_add(2000 + i as u64));
    }
    let validator = Validator::new(mode, p, &Structural);
    let edited = apply_redaction(&c, &cand, &validator).ok();
    (c, edited)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn honest_chains_pass_every_validator(len in 1usize..40, seed in any::<u64>()) {
        let c = random_chain(len, 5, &DifficultyTarget::pow2(252), seed);
        let p = params(3, 4, 3);
        prop_assert!(validate_chain(&c, &p));
        prop_assert!(validate_chain_ext(&c, &p));
        prop_assert!(validate_chain_immutable(&c, &Structural));
        for q in 0..len {
            prop_assert!(validate_chain(&c.prune_right(q), &p));
        }
    }

    #[test]
    fn dumps_round_trip(len in 1usize..30, seed in any::<u64>(), ext in any::<bool>()) {
        let mode = if ext { Mode::Ext } else { Mode::Single };
        let c = random_chain(len, 5, &DifficultyTarget::MAX, seed);
        let mut buf = Vec::new();
        write_chain(&mut buf, &c, mode).unwrap();
        let (back, header) = read_chain(buf.as_slice()).unwrap();
        prop_assert_eq!(back, c);
        prop_assert_eq!(header.mode, mode);
    }

    #[test]
    fn approved_edits_keep_the_chain_valid(
        len in 4usize..12,
        ell in 1usize..6,
        k in 1usize..4,
        seed in any::<u64>(),
        ext in any::<bool>(),
    ) {
        let mode = if ext { Mode::Ext } else { Mode::Single };
        let p = params(k, ell, ell as u64);
        let j = 2 + (seed as usize % (len - 2));
        let (c, edited) = voted_edit(len, j, ell, &p, mode, seed);
        let edited = edited.expect("unanimous vote is accepted");
        let check = |c: &Chain| if ext { validate_chain_ext(c, &p) } else { validate_chain(c, &p) };
        prop_assert!(check(&c));
        prop_assert!(check(&edited));
        prop_assert_eq!(edited.len(), c.len());
        for h in 1..=c.len() {
            let (a, b) = (c.get(h).unwrap(), edited.get(h).unwrap());
            prop_assert_eq!(a.identity(), b.identity());
            prop_assert_eq!(h == j, a != b);
        }
        prop_assert!(!edited.get(j).unwrap().is_unredacted());
    }

    #[test]
    fn edits_short_of_the_threshold_are_rejected(
        len in 4usize..12,
        ell in 2usize..6,
        k in 1usize..4,
        seed in any::<u64>(),
    ) {
        let p = params(k, ell, ell as u64);
        let j = 2 + (seed as usize % (len - 2));
        let (c, edited) = voted_edit(len, j, ell - 1, &p, Mode::Single, seed);
        prop_assert!(edited.is_none());
        let mut payload = c.get(j).unwrap().payload.clone();
        payload.entries.pop();
        let cand = propose_edit(&c, j, payload, p.k, Mode::Single).unwrap();
        let mut forced = c.clone();
        forced.replace(j, cand.block).unwrap();
        prop_assert!(!validate_chain(&forced, &p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn verdict_matches_window_count(
        k in 1usize..5,
        ell in 1usize..8,
        t in 1u64..8,
        n in 1usize..40,
        mut heights in prop::collection::btree_set(1usize..40, 0..10),
    ) {
        let t = t.min(ell as u64);
        let p = params(k, ell, t);
        heights.retain(|&h| h <= n);
        let heights: Vec<usize> = heights.into_iter().collect();
        let v = p.verdict_for(n, &heights);
        match heights.first() {
            None => prop_assert_eq!(v, PolicyVerdict::Voting),
            Some(&r) if r + ell - 1 + k > n => prop_assert_eq!(v, PolicyVerdict::Voting),
            Some(&r) => {
                let count = heights.iter().filter(|&&h| h < r + ell).count() as u64;
                let want = if count >= t {
                    PolicyVerdict::Accept
                } else {
                    PolicyVerdict::Reject
                };
                prop_assert_eq!(v, want);
            }
        }
    }

    #[test]
    fn threshold_is_the_rational_ceiling(num in 1u64..50, extra in 0u64..50, n in 0u64..1000) {
        let den = num + extra;
        let r = Ratio::new(num, den).unwrap();
        let c = r.ceil_mul(n);
        prop_assert!(c * den >= num * n);
        prop_assert!(c == 0 || (c - 1) * den < num * n);
    }

    #[test]
    fn transactions_round_trip(
        prev in any::<[u8; 32]>(),
        index in any::<u32>(),
        witness in prop::collection::vec(any::<u8>(), 0..70),
        amount in any::<u64>(),
        data in prop::collection::vec(any::<u8>(), 0..80),
    ) {
        let mut input = TxInput::new(OutPoint { txid: Digest(prev), index });
        input.witness = witness;
        let tx = Transaction::new(vec![input], vec![
            TxOutput { kind: OutputKind::Spendable, amount, script: vec![7; 32] },
            TxOutput::data(data),
        ]);
        prop_assert_eq!(Transaction::from_bytes(&tx.to_bytes()).unwrap(), tx);
    }

    #[test]
    fn dropping_data_bytes_is_a_valid_candidate(
        data in prop::collection::vec(any::<u8>(), 1..80),
        keep in prop::collection::vec(any::<bool>(), 80),
    ) {
        let input = TxInput::new(OutPoint { txid: Digest([1; 32]), index: 0 });
        let old = Transaction::new(vec![input.clone()], vec![TxOutput::data(data.clone())]);
        let kept: Vec<u8> = data.iter().zip(&keep).filter(|(_, &k)| k).map(|(b, _)| *b).collect();
        let cand = Transaction::new(vec![input], vec![TxOutput::data(kept.clone())]);
        prop_assert_eq!(validate_candidate_tx(&old, &cand), kept.len() < data.len());
    }
}

#[test]
fn genesis_only_chain_is_valid() {
    let c = Chain::new(default_genesis(), DifficultyTarget::MAX);
    assert!(validate_chain(&c, &params(1, 1, 1)));
}
