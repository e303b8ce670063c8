use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::quorum::{AcceptorId, AcceptorSet, Phase};
use crate::sim::{EventKind, Trace};
use crate::synod::{learner_decided, AcceptorReply, AcceptorState, Body, Message, Proposer};
use crate::types::{Accepted, Ballot, Node, Value};

use super::state::{acc_code, acc_decode, State};
use super::{Action, CheckConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: action is outside the configured model")]
    NotInModel { step: usize },
    #[error("step {step}: action is not enabled")]
    NotEnabled { step: usize },
    /// The checker's transition and the core transition disagree. This is
    /// an implementation bug in one of them.
    #[error("step {step}: checker and core disagree: {detail}")]
    Divergence { step: usize, detail: String },
}

/// The end state of a replay and what was learned along the way.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayReport {
    pub states: BTreeMap<AcceptorId, AcceptorState>,
    /// Every distinct decision seen by a learner, with the step that
    /// first exposed it.
    pub decisions: Vec<(usize, Ballot, Value)>,
    /// Two different values were decided at some point in the run.
    pub agreement_violated: bool,
    /// A propose with a higher ballot and a different value followed a
    /// decision.
    pub theorem2_violated: bool,
    /// The replay as message sends, for the trace tools.
    pub trace: Trace<Message>,
}

/// Re-executes `actions` with the acceptor and proposer code in
/// [`crate::synod`], checking after every step that the checker's own
/// encoding reached the same acceptor states.
pub fn replay(cfg: &CheckConfig, actions: &[Action]) -> Result<ReplayReport, ReplayError> {
    cfg.validate()
        .map_err(|_| ReplayError::NotInModel { step: 0 })?;
    let qs = &cfg.quorum;
    let model = cfg.model();
    let mut enc = State::default();
    let mut states: BTreeMap<AcceptorId, AcceptorState> = qs
        .acceptors()
        .map(|a| (a, AcceptorState::default()))
        .collect();
    let mut prepared: BTreeSet<Ballot> = BTreeSet::new();
    let mut promises: BTreeMap<(Ballot, AcceptorId), Option<Accepted>> = BTreeMap::new();
    let mut proposed: BTreeMap<Ballot, Value> = BTreeMap::new();
    let mut accepts: BTreeMap<Ballot, AcceptorSet> = BTreeMap::new();
    let mut report = ReplayReport {
        states: BTreeMap::new(),
        decisions: Vec::new(),
        agreement_violated: false,
        theorem2_violated: false,
        trace: Trace::default(),
    };
    let diverge = |step: usize, detail: String| ReplayError::Divergence { step, detail };

    for (i, action) in actions.iter().enumerate() {
        let step = i + 1;
        let ia = action
            .to_internal(cfg)
            .ok_or(ReplayError::NotInModel { step })?;
        if !model.enabled(&enc, ia) {
            return Err(ReplayError::NotEnabled { step });
        }
        enc = model.apply(&enc, ia);
        let t = step as u64;
        match action {
            Action::SendPrepare { ballot } => {
                prepared.insert(*ballot);
                for a in qs.acceptors() {
                    report.trace.push(
                        t,
                        EventKind::Send {
                            msg: Message {
                                body: Body::Prepare { ballot: *ballot },
                                src: Node::Proposer(ballot.proposer),
                                dst: Node::Acceptor(a),
                            },
                        },
                    );
                }
            }
            Action::Promise { acceptor, ballot } => {
                if !prepared.contains(ballot) {
                    return Err(diverge(step, "promise without prepare".into()));
                }
                let st = states.get_mut(acceptor).expect("acceptor in range");
                match st.handle_prepare(*ballot) {
                    AcceptorReply::Promise { ballot, accepted } => {
                        promises.insert((ballot, *acceptor), accepted.clone());
                        report.trace.push(
                            t,
                            EventKind::Send {
                                msg: Message {
                                    body: Body::Promise { ballot, accepted },
                                    src: Node::Acceptor(*acceptor),
                                    dst: Node::Proposer(ballot.proposer),
                                },
                            },
                        );
                    }
                    other => {
                        return Err(diverge(step, format!("core acceptor answered {other:?}")))
                    }
                }
            }
            Action::SendPropose {
                ballot,
                value,
                quorum,
            } => {
                let mut p = Proposer::new(*ballot, Some(value.clone()));
                p.start(qs, qs.universe())
                    .map_err(|e| diverge(step, format!("proposer start: {e}")))?;
                let mut sent = Vec::new();
                for (k, a) in quorum.iter().enumerate() {
                    let accepted = promises
                        .get(&(*ballot, *a))
                        .ok_or_else(|| diverge(step, format!("no promise from {a:?}")))?
                        .clone();
                    sent = p
                        .on_promise(qs, *a, *ballot, accepted)
                        .map_err(|e| diverge(step, format!("proposer: {e}")))?;
                    let last = k + 1 == quorum.len();
                    if sent.is_empty() == last {
                        return Err(diverge(
                            step,
                            "proposer triggered at a different promise".into(),
                        ));
                    }
                }
                let core_value = p.chosen_value().cloned();
                if core_value.as_ref() != Some(value) {
                    return Err(diverge(step, format!("core proposer chose {core_value:?}")));
                }
                proposed.insert(*ballot, value.clone());
                for msg in sent {
                    report.trace.push(t, EventKind::Send { msg });
                }
            }
            Action::Accept { acceptor, ballot } => {
                let value = proposed
                    .get(ballot)
                    .ok_or_else(|| diverge(step, "accept without propose".into()))?
                    .clone();
                let st = states.get_mut(acceptor).expect("acceptor in range");
                match st.handle_propose(*ballot, &value) {
                    AcceptorReply::Accept { ballot } => {
                        accepts.entry(ballot).or_default().insert(*acceptor);
                        report.trace.push(
                            t,
                            EventKind::Send {
                                msg: Message {
                                    body: Body::Accept { ballot },
                                    src: Node::Acceptor(*acceptor),
                                    dst: Node::Proposer(ballot.proposer),
                                },
                            },
                        );
                    }
                    other => {
                        return Err(diverge(step, format!("core acceptor answered {other:?}")))
                    }
                }
            }
            Action::Amnesia { acceptor } => {
                states.insert(*acceptor, AcceptorState::default());
            }
        }

        // The two encodings must agree on every acceptor.
        for (a, st) in &states {
            let x = a.index();
            let promised = st.promised.map(|b| b.round as u8).unwrap_or(0);
            let accepted = st
                .accepted
                .as_ref()
                .map(|acc| {
                    acc_code(
                        acc.ballot.round as u8,
                        cfg.value_index(&acc.value).unwrap_or(u8::MAX),
                    )
                })
                .unwrap_or(0);
            if promised != enc.promised[x] || accepted != enc.accepted[x] {
                let shown = (enc.accepted[x] != 0).then(|| acc_decode(enc.accepted[x]));
                return Err(diverge(
                    step,
                    format!(
                        "acceptor {x}: core {st:?}, checker promised {} accepted {shown:?}",
                        enc.promised[x]
                    ),
                ));
            }
        }

        match learner_decided(&states, qs) {
            Err(_) => report.agreement_violated = true,
            Ok(Some((b, v))) => {
                if !report
                    .decisions
                    .iter()
                    .any(|(_, b0, v0)| *b0 == b && *v0 == v)
                {
                    report.decisions.push((step, b, v));
                }
            }
            Ok(None) => {}
        }
        if let Some((_, _, v0)) = report.decisions.first() {
            if report.decisions.iter().any(|(_, _, v)| v != v0) {
                report.agreement_violated = true;
            }
        }
        for (b, who) in &accepts {
            if !qs.contains_quorum(Phase::Two, *who) {
                continue;
            }
            let v = &proposed[b];
            if proposed.range(*b..).any(|(b2, v2)| b2 > b && v2 != v) {
                report.theorem2_violated = true;
            }
        }
    }
    report.states = states;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{explore, Property};
    use crate::quorum::QuorumSystem;

    #[test]
    fn empty_path_is_the_initial_state() {
        let cfg = CheckConfig::new(QuorumSystem::majority(3, false).unwrap(), 2, 2);
        let r = replay(&cfg, &[]).unwrap();
        assert!(r.decisions.is_empty());
        assert!(r.states.values().all(|s| *s == AcceptorState::default()));
    }

    #[test]
    fn disabled_action_is_rejected() {
        let cfg = CheckConfig::new(QuorumSystem::majority(3, false).unwrap(), 2, 2);
        let a = Action::Promise {
            acceptor: AcceptorId(0),
            ballot: cfg.ballot(1),
        };
        assert_eq!(replay(&cfg, &[a]), Err(ReplayError::NotEnabled { step: 1 }));
        let far = Action::SendPrepare {
            ballot: Ballot::new(9, crate::types::ProposerId(0)),
        };
        assert_eq!(
            replay(&cfg, &[far]),
            Err(ReplayError::NotInModel { step: 1 })
        );
    }

    #[test]
    fn amnesia_breaks_majority() {
        let cfg = CheckConfig {
            amnesia: 1,
            properties: vec![Property::Agreement],
            ..CheckConfig::new(QuorumSystem::majority(3, false).unwrap(), 2, 2)
        };
        let r = explore(&cfg).unwrap();
        let v = r
            .violation(Property::Agreement)
            .expect("amnesia permits disagreement");
        let rep = replay(&cfg, &v.actions).unwrap();
        assert!(rep.agreement_violated);
        assert!(v
            .actions
            .iter()
            .any(|a| matches!(a, Action::Amnesia { .. })));
    }
}
