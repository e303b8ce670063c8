//! Hand-scheduled single-decree runs with two proposers and four acceptors.

use std::collections::{BTreeMap, VecDeque};

use crate::quorum::{AcceptorId, AcceptorSet, QuorumSystem, TargetSelector, TargetStrategy};
use crate::synod::{learner_decided, Acceptor, AcceptorState, Body, Message, Proposer};
use crate::types::{Ballot, Node, ProposerId, Value};

use super::trace::{EventKind, Trace};
use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Fig2a,
    Fig2b,
}

impl std::str::FromStr for ScenarioName {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2a" => Ok(ScenarioName::Fig2a),
            "fig2b" => Ok(ScenarioName::Fig2b),
            other => Err(SimError::InvalidConfig(format!(
                "unknown scenario `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioOutcome {
    pub trace: Trace<Message>,
    /// What each proposer learned, indexed by proposer.
    pub proposer_decisions: Vec<Option<Value>>,
    /// The decision visible in the final acceptor states.
    pub learned: Option<(Ballot, Value)>,
}

struct Net<'a> {
    qs: &'a QuorumSystem,
    acceptors: Vec<Acceptor>,
    proposers: Vec<Proposer>,
    pending: VecDeque<Message>,
    trace: Trace<Message>,
    step: u64,
}

impl<'a> Net<'a> {
    fn new(qs: &'a QuorumSystem, proposers: Vec<Proposer>) -> Self {
        Net {
            qs,
            acceptors: qs.acceptors().map(Acceptor::new).collect(),
            proposers,
            pending: VecDeque::new(),
            trace: Trace::default(),
            step: 0,
        }
    }

    fn send_all(&mut self, msgs: Vec<Message>) {
        for msg in msgs {
            self.trace
                .push(self.step, EventKind::Send { msg: msg.clone() });
            self.pending.push_back(msg);
        }
    }

    fn start(&mut self, p: usize, targets: &[u32]) -> Result<(), SimError> {
        let targets: AcceptorSet = targets.iter().map(|&a| AcceptorId(a)).collect();
        let msgs = self.proposers[p]
            .start(self.qs, targets)
            .map_err(|e| SimError::Scenario(e.to_string()))?;
        self.send_all(msgs);
        Ok(())
    }

    /// Delivers pending messages in FIFO order while `allow` accepts them,
    /// including replies they trigger. Held messages keep their place.
    fn run(&mut self, allow: impl Fn(&Message) -> bool) -> Result<(), SimError> {
        let mut held = VecDeque::new();
        while let Some(msg) = self.pending.pop_front() {
            if !allow(&msg) {
                held.push_back(msg);
                continue;
            }
            self.step += 1;
            self.trace
                .push(self.step, EventKind::Deliver { msg: msg.clone() });
            match msg.dst {
                Node::Acceptor(a) => {
                    if let Some(reply) = self.acceptors[a.index()].handle(&msg) {
                        self.send_all(vec![reply]);
                    }
                }
                Node::Proposer(p) => {
                    let prop = &mut self.proposers[p.0 as usize];
                    let was = prop.decided().cloned();
                    let out = prop
                        .handle(self.qs, &msg)
                        .map_err(|e| SimError::Scenario(e.to_string()))?;
                    if was.is_none() {
                        if let Some(v) = prop.decided() {
                            let (ballot, value) = (prop.ballot(), v.clone());
                            self.trace.push(
                                self.step,
                                EventKind::Decide {
                                    node: msg.dst,
                                    slot: None,
                                    ballot,
                                    value,
                                },
                            );
                        }
                    }
                    self.send_all(out);
                }
                _ => {}
            }
        }
        self.pending = held;
        Ok(())
    }

    fn outcome(self, scenario: ScenarioName) -> Result<ScenarioOutcome, SimError> {
        let states: BTreeMap<AcceptorId, AcceptorState> = self
            .acceptors
            .iter()
            .map(|a| (a.id, a.state.clone()))
            .collect();
        let learned = learner_decided(&states, self.qs).map_err(|v| SimError::OutcomeMismatch {
            scenario,
            detail: v.to_string(),
            trace: Box::new(self.trace.clone()),
        })?;
        Ok(ScenarioOutcome {
            proposer_decisions: self
                .proposers
                .iter()
                .map(|p| p.decided().cloned())
                .collect(),
            trace: self.trace,
            learned,
        })
    }
}

fn proposer(id: u32, round: u64, value: &str, q2_order: &[u32]) -> Proposer {
    let order = q2_order.iter().map(|&a| AcceptorId(a)).collect();
    Proposer::new(Ballot::new(round, ProposerId(id)), Some(Value::from(value)))
        .with_selector(TargetSelector::new(TargetStrategy::Preferred { order }))
}

fn is_phase1(m: &Message) -> bool {
    matches!(m.body, Body::Prepare { .. } | Body::Promise { .. })
}

/// Replays one of the two-proposer executions over four acceptors and
/// checks its outcome. `qs` must have four acceptors; proposers send phase 2
/// to the listed acceptors first and extend the set if `qs` needs more.
///
/// * `fig2a`: P0 runs both phases via A0..A2 and decides `a` with {A0, A1};
///   P1 then runs phase 1 via {A1, A2, A3}, learns `a` from A1 and decides
///   it again at ballot 2.
/// * `fig2b`: both proposers finish phase 1 before either proposes; P0
///   sends `a` to {A0, A1} while P1 sends `b` to {A3, A2}. A1 has promised
///   ballot 2 and rejects P0, so only P1 succeeds.
pub fn scripted_scenario(
    name: ScenarioName,
    qs: &QuorumSystem,
) -> Result<ScenarioOutcome, SimError> {
    if qs.n() != 4 {
        return Err(SimError::InvalidConfig(format!(
            "scripted scenarios need 4 acceptors, got {}",
            qs.n()
        )));
    }
    let p0 = proposer(0, 1, "a", &[0, 1, 2, 3]);
    let p1_value = if name == ScenarioName::Fig2a {
        "a"
    } else {
        "b"
    };
    let p1 = proposer(1, 2, p1_value, &[3, 2, 1, 0]);
    let mut net = Net::new(qs, vec![p0, p1]);
    match name {
        ScenarioName::Fig2a => {
            net.start(0, &[0, 1, 2])?;
            net.run(|_| true)?;
            net.start(1, &[3, 2, 1])?;
            net.run(|_| true)?;
        }
        ScenarioName::Fig2b => {
            net.start(0, &[0, 1, 2])?;
            net.run(is_phase1)?;
            net.start(1, &[3, 2, 1])?;
            net.run(is_phase1)?;
            net.run(|_| true)?;
        }
    }
    let out = net.outcome(name)?;
    let mismatch = |what: &str| {
        Err(SimError::OutcomeMismatch {
            scenario: name,
            detail: what.to_string(),
            trace: Box::new(out.trace.clone()),
        })
    };
    let a = Value::from("a");
    match name {
        ScenarioName::Fig2a => {
            if out
                .proposer_decisions
                .iter()
                .any(|d| d.as_ref() != Some(&a))
            {
                return mismatch("both proposers should decide `a`");
            }
        }
        ScenarioName::Fig2b => {
            let winners = out
                .proposer_decisions
                .iter()
                .filter(|d| d.is_some())
                .count();
            if winners != 1 {
                return mismatch("exactly one proposer should succeed");
            }
        }
    }
    Ok(out)
}
