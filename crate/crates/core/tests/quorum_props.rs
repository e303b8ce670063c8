//! Quorum systems against brute-force oracles written independently of the
//! library's own analysis code.

use fpaxos::quorum::{
    k_subsets, AcceptorId, AcceptorSet, GridMode, Intersection, Phase, QuorumKind, QuorumSystem,
};
use proptest::prelude::*;

fn set(bits: u64) -> AcceptorSet {
    AcceptorSet::from_bits(bits)
}

fn all_constructors(n: usize) -> Vec<QuorumSystem> {
    let mut out = vec![
        QuorumSystem::majority(n, false).unwrap(),
        QuorumSystem::majority(n, true).unwrap(),
    ];
    for q2 in 1..=n {
        out.push(QuorumSystem::simple(n, q2).unwrap());
    }
    for rows in 1..=n {
        if n.is_multiple_of(rows) {
            out.push(QuorumSystem::grid(rows, n / rows, GridMode::Paxos).unwrap());
            out.push(QuorumSystem::grid(rows, n / rows, GridMode::Fpaxos).unwrap());
        }
    }
    out
}

/// Some phase-1 quorum and some phase-2 quorum are disjoint, by trying
/// every pair of disjoint subsets.
fn oracle_has_disjoint_pair(qs: &QuorumSystem) -> bool {
    let n = qs.n();
    let full = (1u64 << n) - 1;
    (0..=full).any(|a| {
        qs.contains_quorum(Phase::One, set(a)) && {
            let rest = full & !a;
            // Every subset of the complement.
            let mut b = rest;
            loop {
                if qs.contains_quorum(Phase::Two, set(b)) {
                    break true;
                }
                if b == 0 {
                    break false;
                }
                b = (b - 1) & rest;
            }
        }
    })
}

fn oracle_min_size(qs: &QuorumSystem, phase: Phase) -> Option<usize> {
    (0..1u64 << qs.n())
        .filter(|&m| qs.contains_quorum(phase, set(m)))
        .map(|m| m.count_ones() as usize)
        .min()
}

/// Largest f such that every failure set of size f leaves both phases
/// formable among the survivors.
fn oracle_guaranteed_f(qs: &QuorumSystem) -> usize {
    let n = qs.n();
    let full = (1u64 << n) - 1;
    let survives = |failed: u64| {
        let alive = set(full & !failed);
        qs.contains_quorum(Phase::One, alive) && qs.contains_quorum(Phase::Two, alive)
    };
    let mut f = 0;
    while f < n {
        let next = f + 1;
        let all_ok = (0..=full)
            .filter(|m| m.count_ones() as usize == next)
            .all(survives);
        if !all_ok {
            break;
        }
        f = next;
    }
    f
}

#[test]
fn every_constructor_intersects_up_to_twelve() {
    for n in 1..=12 {
        for qs in all_constructors(n) {
            assert_eq!(
                qs.validate_cross_intersection(),
                Intersection::Holds,
                "{qs:?}"
            );
        }
    }
}

#[test]
fn intersection_check_matches_oracle_for_constructors() {
    for n in 1..=8 {
        for qs in all_constructors(n) {
            assert!(!oracle_has_disjoint_pair(&qs), "{qs:?}");
        }
    }
}

#[test]
fn simple_guaranteed_f_is_q2_minus_one() {
    // With |Q2| at most half the acceptors the phase-2 side is the binding
    // one. Past half, |Q1| shrinks below |Q2| and N - |Q2| failures already
    // wipe out every phase-2 quorum.
    for n in 1..=12 {
        for q2 in 1..=n {
            let qs = QuorumSystem::simple(n, q2).unwrap();
            let ex = qs.failure_tolerance_exhaustive().unwrap();
            let cf = qs.failure_tolerance_closed_form().unwrap();
            let expected = if q2 <= n.div_ceil(2) { q2 - 1 } else { n - q2 };
            assert_eq!(ex.guaranteed_f, expected, "simple({n},{q2})");
            assert_eq!(ex.phase2_only_max_f, n - q2, "simple({n},{q2})");
            assert_eq!(ex, cf, "simple({n},{q2})");
        }
    }
}

#[test]
fn closed_forms_agree_with_exhaustive_search() {
    for n in 1..=12 {
        for qs in all_constructors(n) {
            let ex = qs.failure_tolerance_exhaustive().unwrap();
            let cf = qs.failure_tolerance_closed_form().unwrap();
            assert_eq!(ex, cf, "{qs:?}");
        }
    }
}

#[test]
fn guaranteed_f_matches_oracle() {
    for n in 1..=9 {
        for qs in all_constructors(n) {
            assert_eq!(
                qs.failure_tolerance().unwrap().guaranteed_f,
                oracle_guaranteed_f(&qs),
                "{qs:?}"
            );
        }
    }
}

#[test]
fn minimal_sizes_match_oracle() {
    for n in 1..=10 {
        for qs in all_constructors(n) {
            for phase in [Phase::One, Phase::Two] {
                assert_eq!(
                    qs.min_quorum_size(phase),
                    oracle_min_size(&qs, phase),
                    "{qs:?}"
                );
            }
        }
    }
}

#[test]
fn improved_majority_is_simple_with_half() {
    // The classic majority equals simple(n, n/2 + 1) only for odd n; for
    // every n the improved majority equals simple(n, ceil(n/2)).
    for n in 1..=12 {
        let improved = QuorumSystem::majority(n, true).unwrap();
        let simple = QuorumSystem::simple(n, n.div_ceil(2)).unwrap();
        let classic = QuorumSystem::majority(n, false).unwrap();
        let simple_half = QuorumSystem::simple(n, n / 2 + 1).unwrap();
        for m in 0..1u64 << n {
            for phase in [Phase::One, Phase::Two] {
                assert_eq!(
                    improved.contains_quorum(phase, set(m)),
                    simple.contains_quorum(phase, set(m)),
                    "n={n}"
                );
                if n % 2 == 1 {
                    assert_eq!(
                        classic.contains_quorum(phase, set(m)),
                        simple_half.contains_quorum(phase, set(m)),
                        "n={n}"
                    );
                }
            }
        }
    }
}

#[test]
fn fpaxos_grid_same_phase_quorums_are_disjoint() {
    for (rows, cols) in [(2, 2), (2, 3), (3, 3), (4, 5)] {
        let qs = QuorumSystem::grid(rows, cols, GridMode::Fpaxos).unwrap();
        for phase in [Phase::One, Phase::Two] {
            let mins = qs.minimal_quorums(phase).unwrap();
            for (i, a) in mins.iter().enumerate() {
                for b in &mins[i + 1..] {
                    assert!(!a.intersects(*b), "{rows}x{cols} {phase:?}");
                }
            }
        }
    }
}

#[test]
fn grid_paxos_quorum_is_row_plus_column() {
    let qs = QuorumSystem::grid(4, 5, GridMode::Paxos).unwrap();
    assert_eq!(qs.min_quorum_size(Phase::One), Some(8));
    let mins = qs.minimal_quorums(Phase::One).unwrap();
    assert_eq!(mins.len(), 4 * 5);
    assert!(mins.iter().all(|q| q.len() == 8));
}

#[test]
fn k_subsets_counts() {
    for n in 0..=10usize {
        for k in 0..=n {
            let subs = k_subsets(n, k);
            let binom = (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64);
            assert_eq!(subs.len() as u64, binom);
            assert!(subs.iter().all(|s| s.len() == k && s.bits() >> n == 0));
        }
    }
}

#[test]
fn quorum_json_round_trip() {
    for n in 1..=6 {
        for qs in all_constructors(n) {
            let json = serde_json::to_string(&qs).unwrap();
            let back: QuorumSystem = serde_json::from_str(&json).unwrap();
            assert_eq!(back, qs, "{json}");
        }
    }
    let qs: QuorumSystem =
        serde_json::from_str(r#"{"kind":"grid-fpaxos","rows":4,"cols":5}"#).unwrap();
    assert_eq!(qs.kind(), QuorumKind::GridFpaxos);
    assert_eq!(qs.n(), 20);
}

fn arb_family(n: usize) -> impl Strategy<Value = Vec<AcceptorSet>> {
    prop::collection::vec(1u64..(1u64 << n), 1..5).prop_map(|v| v.into_iter().map(set).collect())
}

fn arb_explicit() -> impl Strategy<Value = QuorumSystem> {
    (1usize..=7).prop_flat_map(|n| {
        (arb_family(n), arb_family(n))
            .prop_map(move |(q1, q2)| QuorumSystem::explicit(n, q1, q2).unwrap())
    })
}

fn arb_constructed() -> impl Strategy<Value = QuorumSystem> {
    (1usize..=12, 0usize..64).prop_map(|(n, pick)| {
        let all = all_constructors(n);
        all[pick % all.len()].clone()
    })
}

proptest! {
    #[test]
    fn intersection_verdict_matches_oracle(qs in arb_explicit()) {
        let verdict = qs.validate_cross_intersection();
        let disjoint = oracle_has_disjoint_pair(&qs);
        prop_assert_eq!(verdict.verdict(), Some(!disjoint));
        if let Intersection::Violated { q1, q2 } = verdict {
            prop_assert!(!q1.intersects(q2));
            prop_assert!(qs.is_q1(q1).unwrap() && qs.is_q2(q2).unwrap());
        }
    }

    #[test]
    fn predicates_are_upward_closed(qs in arb_constructed(), a in any::<u64>(), b in any::<u64>()) {
        let mask = (1u64 << qs.n()) - 1;
        let small = set(a & mask);
        let big = small.union(set(b & mask));
        for phase in [Phase::One, Phase::Two] {
            if qs.contains_quorum(phase, small) {
                prop_assert!(qs.contains_quorum(phase, big));
            }
        }
    }

    #[test]
    fn explicit_predicates_are_upward_closed(qs in arb_explicit(), a in any::<u64>(), b in any::<u64>()) {
        let mask = (1u64 << qs.n()) - 1;
        let small = set(a & mask);
        let big = small.union(set(b & mask));
        for phase in [Phase::One, Phase::Two] {
            if qs.contains_quorum(phase, small) {
                prop_assert!(qs.contains_quorum(phase, big));
            }
        }
    }

    #[test]
    fn select_returns_a_minimal_quorum(qs in arb_constructed(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<AcceptorId> = qs.acceptors().collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        for phase in [Phase::One, Phase::Two] {
            let q = qs.select(phase, order.clone()).unwrap();
            prop_assert!(qs.contains_quorum(phase, q));
            for a in q.iter() {
                let mut smaller = q;
                smaller.remove(a);
                prop_assert!(!qs.contains_quorum(phase, smaller));
            }
        }
    }

    #[test]
    fn out_of_universe_members_are_errors(n in 1usize..10, extra in 10u32..64) {
        let qs = QuorumSystem::majority(n, false).unwrap();
        let mut s = qs.universe();
        s.insert(AcceptorId(extra));
        prop_assert!(qs.is_q1(s).is_err());
    }
}
