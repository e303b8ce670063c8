//! Single-decree properties under random interleavings, drops and retries.

use std::collections::BTreeMap;

use fpaxos::quorum::{AcceptorId, GridMode, Phase, QuorumSystem, TargetSelector, TargetStrategy};
use fpaxos::synod::{
    learner_decided, Acceptor, AcceptorReply, AcceptorState, Body, Message, Proposer, ProposerPhase,
};
use fpaxos::types::{Accepted, Ballot, Node, ProposerId, Value};
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Op {
    Prepare(u64),
    Propose(u64, u8),
}

fn arb_op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (1u64..8).prop_map(Op::Prepare),
        (1u64..8, 0u8..3).prop_map(|(r, v)| Op::Propose(r, v)),
    ]
}

proptest! {
    #[test]
    fn acceptor_state_is_monotone(ops in prop::collection::vec(arb_op(), 0..40)) {
        let mut st = AcceptorState::default();
        for op in ops {
            let before = st.clone();
            let reply = match op {
                Op::Prepare(r) => st.handle_prepare(Ballot::new(r, ProposerId(0))),
                Op::Propose(r, v) => st.handle_propose(Ballot::new(r, ProposerId(0)), &Value::from(format!("v{v}").as_str())),
            };
            prop_assert!(st.promised >= before.promised);
            let ab = |s: &AcceptorState| s.accepted.as_ref().map(|a| a.ballot);
            prop_assert!(ab(&st) >= ab(&before));
            if let Some(acc) = &st.accepted {
                prop_assert!(Some(acc.ballot) <= st.promised);
            }
            if let AcceptorReply::Nack { .. } = reply {
                prop_assert_eq!(&st, &before);
            }
        }
    }
}

/// A step of the random schedule.
#[derive(Clone, Debug)]
enum Step {
    /// Deliver the pending message at this position (mod the queue length).
    Deliver(usize),
    /// Lose it instead.
    Drop(usize),
    /// Deliver it but keep a copy in the queue.
    Duplicate(usize),
    /// Restart this proposer at a higher ballot.
    Retry(usize),
}

fn arb_step() -> impl Strategy<Value = Step> {
    prop_oneof![
        6 => any::<usize>().prop_map(Step::Deliver),
        1 => any::<usize>().prop_map(Step::Drop),
        1 => any::<usize>().prop_map(Step::Duplicate),
        1 => any::<usize>().prop_map(Step::Retry),
    ]
}

fn systems() -> Vec<QuorumSystem> {
    vec![
        QuorumSystem::majority(3, false).unwrap(),
        QuorumSystem::majority(4, true).unwrap(),
        QuorumSystem::simple(5, 2).unwrap(),
        QuorumSystem::simple(4, 1).unwrap(),
        QuorumSystem::grid(2, 3, GridMode::Fpaxos).unwrap(),
        QuorumSystem::grid(3, 2, GridMode::Paxos).unwrap(),
    ]
}

#[derive(Debug, PartialEq, Eq)]
struct Outcome {
    acceptors: Vec<AcceptorState>,
    decided: Vec<Option<Value>>,
    delivered: usize,
}

/// Runs a schedule, checking the proposer-side invariants on every
/// transition. Returns the end state.
fn run(
    qs: &QuorumSystem,
    proposers: usize,
    seed: u64,
    steps: &[Step],
) -> Result<Outcome, TestCaseError> {
    let mut acceptors: Vec<Acceptor> = qs.acceptors().map(Acceptor::new).collect();
    let mut ps: Vec<Proposer> = (0..proposers)
        .map(|p| {
            let b = Ballot::new(1, ProposerId(p as u32));
            let sel = TargetSelector::new(TargetStrategy::Seeded {
                seed: seed ^ p as u64,
            });
            Proposer::new(b, Some(Value::from(format!("p{p}").as_str()))).with_selector(sel)
        })
        .collect();
    let mut queue: Vec<Message> = Vec::new();
    for p in ps.iter_mut() {
        queue.extend(p.start(qs, qs.universe()).unwrap());
    }
    let mut delivered = 0;
    let mut learned: Option<(Ballot, Value)> = None;

    for step in steps {
        match *step {
            Step::Retry(i) => {
                let p = &mut ps[i % proposers];
                if p.phase() != ProposerPhase::Decided {
                    queue.extend(p.retry(qs, qs.universe()).unwrap());
                }
                continue;
            }
            _ if queue.is_empty() => continue,
            Step::Drop(i) => {
                let k = i % queue.len();
                queue.remove(k);
                continue;
            }
            _ => {}
        }
        let (Step::Deliver(i) | Step::Duplicate(i)) = *step else {
            unreachable!()
        };
        let k = i % queue.len();
        let msg = if matches!(step, Step::Duplicate(_)) {
            queue[k].clone()
        } else {
            queue.remove(k)
        };
        delivered += 1;
        match msg.dst {
            Node::Acceptor(a) => {
                if let Some(reply) = acceptors[a.index()].handle(&msg) {
                    queue.push(reply);
                }
            }
            Node::Proposer(pid) => {
                let p = &mut ps[pid.0 as usize];
                let phase_before = p.phase();
                let promises_before: BTreeMap<AcceptorId, Option<Accepted>> = p.promises().clone();
                let out = p.handle(qs, &msg).unwrap();
                if !out.is_empty() {
                    // Phase 2 starts only on a phase-1 quorum of promises.
                    prop_assert_eq!(phase_before, ProposerPhase::Phase1);
                    prop_assert!(qs.contains_quorum(Phase::One, p.promise_senders()));
                    prop_assert!(
                        !qs.contains_quorum(Phase::One, promises_before.keys().copied().collect())
                    );
                    // Value choice: highest-ballot accepted value, else own candidate.
                    let expected = p
                        .promises()
                        .values()
                        .flatten()
                        .max_by_key(|a| a.ballot)
                        .map(|a| a.value.clone())
                        .or_else(|| p.candidate().cloned());
                    prop_assert_eq!(p.chosen_value().cloned(), expected.clone());
                    let targets: fpaxos::quorum::AcceptorSet = out
                        .iter()
                        .map(|m| match (m.dst, &m.body) {
                            (Node::Acceptor(a), Body::Propose { value, .. }) => {
                                assert_eq!(Some(value), expected.as_ref());
                                a
                            }
                            other => panic!("unexpected output {other:?}"),
                        })
                        .collect();
                    prop_assert!(qs.contains_quorum(Phase::Two, targets));
                }
                if p.phase() == ProposerPhase::Decided && phase_before != ProposerPhase::Decided {
                    prop_assert!(qs.contains_quorum(Phase::Two, p.accepts()));
                }
                queue.extend(out);
            }
            other => panic!("message to {other}"),
        }

        let states: BTreeMap<AcceptorId, AcceptorState> =
            acceptors.iter().map(|a| (a.id, a.state.clone())).collect();
        match learner_decided(&states, qs) {
            Err(e) => return Err(TestCaseError::fail(format!("learner saw {e}"))),
            Ok(Some(d)) => {
                if let Some(prev) = &learned {
                    prop_assert_eq!(&prev.1, &d.1, "learned value changed");
                }
                learned.get_or_insert(d);
            }
            Ok(None) => {}
        }
    }

    let decided: Vec<Option<Value>> = ps.iter().map(|p| p.decided().cloned()).collect();
    let mut values = decided
        .iter()
        .flatten()
        .chain(learned.as_ref().map(|l| &l.1));
    if let Some(first) = values.next() {
        for v in values {
            prop_assert_eq!(v, first, "two values decided");
        }
    }
    Ok(Outcome {
        acceptors: acceptors.into_iter().map(|a| a.state).collect(),
        decided,
        delivered,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_schedules_never_decide_two_values(
        sys in 0usize..6,
        proposers in 1usize..4,
        seed in any::<u64>(),
        steps in prop::collection::vec(arb_step(), 0..120),
    ) {
        let qs = &systems()[sys];
        run(qs, proposers, seed, &steps)?;
    }

    #[test]
    fn same_schedule_same_outcome(
        sys in 0usize..6,
        seed in any::<u64>(),
        steps in prop::collection::vec(arb_step(), 0..80),
    ) {
        let qs = &systems()[sys];
        let a = run(qs, 2, seed, &steps)?;
        let b = run(qs, 2, seed, &steps)?;
        prop_assert_eq!(a, b);
    }
}

#[test]
fn lone_proposer_decides_its_candidate() {
    for qs in systems() {
        let steps: Vec<Step> = (0..200).map(|_| Step::Deliver(0)).collect();
        let out = run(&qs, 1, 7, &steps).unwrap();
        assert_eq!(out.decided, vec![Some(Value::from("p0"))], "{qs:?}");
    }
}
