//! Model checker: state counts, counterexample replay, sweep agreement.

use fpaxos::checker::{
    explore, quorum_safety_sweep, replay, Action, CheckConfig, CheckResult, Counterexample,
    Property,
};
use fpaxos::quorum::{AcceptorId, AcceptorSet, GridMode, QuorumSystem};

fn catalog() -> Vec<(&'static str, QuorumSystem)> {
    vec![
        ("majority(3)", QuorumSystem::majority(3, false).unwrap()),
        (
            "improved-majority(4)",
            QuorumSystem::majority(4, true).unwrap(),
        ),
        ("simple(4,2)", QuorumSystem::simple(4, 2).unwrap()),
        (
            "grid-fpaxos(2x2)",
            QuorumSystem::grid(2, 2, GridMode::Fpaxos).unwrap(),
        ),
    ]
}

fn disjoint() -> QuorumSystem {
    let s = |i: u32| AcceptorSet::singleton(AcceptorId(i));
    QuorumSystem::explicit(2, vec![s(0)], vec![s(1)]).unwrap()
}

fn run(qs: QuorumSystem, ballots: u8, symmetry: bool) -> CheckResult {
    explore(&CheckConfig {
        symmetry,
        ..CheckConfig::new(qs, ballots, 2)
    })
    .unwrap()
}

/// Counts recorded from the explorer as implemented; a change here means
/// the transition relation or the reduction changed.
#[test]
fn state_counts_are_stable() {
    let expected: [(u64, u64, u32); 4] = [
        (3921, 9442, 16),
        (20609, 58648, 20),
        (20609, 58648, 20),
        (39937, 123600, 20),
    ];
    for ((name, qs), (states, transitions, depth)) in catalog().into_iter().zip(expected) {
        let r = run(qs, 2, false);
        assert!(r.complete && r.is_safe(), "{name}");
        assert_eq!(
            (r.states, r.transitions, r.depth),
            (states, transitions, depth),
            "{name}"
        );
    }
    let reduced = [443u64, 834, 834, 5164];
    for ((name, qs), states) in catalog().into_iter().zip(reduced) {
        let r = run(qs, 2, true);
        assert!(r.complete && r.is_safe(), "{name}");
        assert_eq!(r.states, states, "{name}");
    }
}

#[test]
fn three_ballots_with_symmetry_are_safe() {
    for (name, qs) in catalog() {
        let r = run(qs, 3, true);
        assert!(r.complete && r.is_safe(), "{name}: {} states", r.states);
    }
}

#[test]
fn improved_majority_and_simple_half_explore_identically() {
    let a = run(QuorumSystem::majority(4, true).unwrap(), 2, false);
    let b = run(QuorumSystem::simple(4, 2).unwrap(), 2, false);
    assert_eq!(a, b);
}

#[test]
fn disjoint_counterexample_replays_to_two_decisions() {
    let cfg = CheckConfig::new(disjoint(), 2, 2);
    let r = explore(&cfg).unwrap();
    let v = r.violation(Property::Agreement).unwrap();
    assert!(v.actions.len() <= 10);
    let rep = replay(&cfg, &v.actions).unwrap();
    assert!(rep.agreement_violated);
    let values: Vec<_> = rep.decisions.iter().map(|d| d.2.clone()).collect();
    assert_eq!(values.len(), 2);
    assert_ne!(values[0], values[1]);
    // The replay trace contains both conflicting proposals.
    let proposes = rep
        .trace
        .events
        .iter()
        .filter(|e| matches!(&e.kind, fpaxos::sim::EventKind::Send { msg } if msg.body.name() == "propose"))
        .count();
    assert!(proposes >= 2);
}

#[test]
fn every_counterexample_replays() {
    let mut configs: Vec<CheckConfig> = Vec::new();
    for n in 1..=3usize {
        for q1 in 1..=n {
            for q2 in 1..=n {
                if q1 + q2 <= n {
                    let qs = QuorumSystem::explicit_thresholds(n, q1, q2).unwrap();
                    configs.push(CheckConfig::new(qs.clone(), 2, 2));
                    configs.push(CheckConfig {
                        symmetry: true,
                        ..CheckConfig::new(qs, 3, 2)
                    });
                }
            }
        }
    }
    configs.push(CheckConfig::new(disjoint(), 3, 3));
    configs.push(CheckConfig {
        amnesia: 1,
        ..CheckConfig::new(QuorumSystem::majority(3, false).unwrap(), 2, 2)
    });
    configs.push(CheckConfig {
        amnesia: 1,
        symmetry: true,
        ..CheckConfig::new(QuorumSystem::grid(2, 2, GridMode::Fpaxos).unwrap(), 2, 2)
    });
    for cfg in configs {
        let r = explore(&cfg).unwrap();
        assert!(!r.is_safe(), "{cfg:?}");
        for v in &r.violations {
            let rep = replay(&cfg, &v.actions).unwrap_or_else(|e| panic!("{cfg:?}: {e}"));
            match v.property {
                Property::Agreement => assert!(rep.agreement_violated, "{cfg:?}"),
                Property::Theorem2 => assert!(rep.theorem2_violated, "{cfg:?}"),
            }
            // Every strict prefix is free of the violation: the path is minimal in length.
            let prefix = replay(&cfg, &v.actions[..v.actions.len() - 1]).unwrap();
            match v.property {
                Property::Agreement => assert!(!prefix.agreement_violated),
                Property::Theorem2 => assert!(!prefix.theorem2_violated),
            }
            // Round trip through the file format.
            let cx = Counterexample::new(&cfg, v);
            assert_eq!(Counterexample::from_jsonl(&cx.to_jsonl()).unwrap(), cx);
        }
    }
}

#[test]
fn replay_rejects_a_tampered_counterexample() {
    let cfg = CheckConfig::new(disjoint(), 2, 2);
    let r = explore(&cfg).unwrap();
    let mut actions = r.violation(Property::Agreement).unwrap().actions.clone();
    // Drop the first promise: some later propose loses its support.
    let k = actions
        .iter()
        .position(|a| matches!(a, Action::Promise { .. }))
        .unwrap();
    actions.remove(k);
    assert!(replay(&cfg, &actions).is_err());
}

#[test]
fn sweep_matches_intersection_check() {
    let report = quorum_safety_sweep(4, 2_000_000).unwrap();
    assert!(
        report.all_agree(),
        "{:#?}",
        report
            .entries
            .iter()
            .filter(|e| !e.agrees())
            .collect::<Vec<_>>()
    );
    assert!(report.entries.iter().any(|e| !e.intersects));
    assert!(report.entries.iter().any(|e| e.intersects));
    assert!(quorum_safety_sweep(5, 10).is_err());
}

#[test]
fn explore_is_deterministic() {
    let cfg = CheckConfig {
        symmetry: true,
        ..CheckConfig::new(disjoint(), 3, 2)
    };
    assert_eq!(explore(&cfg).unwrap(), explore(&cfg).unwrap());
}
