//! Single-decree Flexible Paxos as explicit state machines.
//!
//! Acceptors and proposers never share state; they exchange [`Message`]s and
//! every transition is a deterministic function of the current state and
//! one input. Quorum checks go through a [`QuorumSystem`], so the same code
//! runs classic majority Paxos and any flexible quorum system.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quorum::{AcceptorId, AcceptorSet, Phase, QuorumSystem, TargetSelector};
use crate::types::{Accepted, Ballot, Node, ProposerId, Value};

/// Durable acceptor state: the highest ballot promised and the last
/// accepted proposal.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AcceptorState {
    pub promised: Option<Ballot>,
    pub accepted: Option<Accepted>,
}

/// What an acceptor answers to a prepare or a propose.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AcceptorReply {
    Promise {
        ballot: Ballot,
        accepted: Option<Accepted>,
    },
    Accept {
        ballot: Ballot,
    },
    Nack {
        ballot: Ballot,
        promised: Ballot,
    },
}

impl AcceptorState {
    /// Promise `ballot` if it is higher than anything promised so far.
    pub fn handle_prepare(&mut self, ballot: Ballot) -> AcceptorReply {
        match self.promised {
            Some(p) if ballot <= p => AcceptorReply::Nack {
                ballot,
                promised: p,
            },
            _ => {
                self.promised = Some(ballot);
                AcceptorReply::Promise {
                    ballot,
                    accepted: self.accepted.clone(),
                }
            }
        }
    }

    /// Accept `(ballot, value)` if `ballot` is at least the promised ballot.
    /// Re-delivery at the same ballot accepts again.
    pub fn handle_propose(&mut self, ballot: Ballot, value: &Value) -> AcceptorReply {
        match self.promised {
            Some(p) if ballot < p => AcceptorReply::Nack {
                ballot,
                promised: p,
            },
            _ => {
                self.promised = Some(ballot);
                self.accepted = Some(Accepted::new(ballot, value.clone()));
                AcceptorReply::Accept { ballot }
            }
        }
    }
}

/// Single-decree protocol messages.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    Prepare {
        ballot: Ballot,
    },
    Promise {
        ballot: Ballot,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        accepted: Option<Accepted>,
    },
    Propose {
        ballot: Ballot,
        value: Value,
    },
    Accept {
        ballot: Ballot,
    },
    Nack {
        ballot: Ballot,
        promised: Ballot,
    },
}

impl Body {
    pub fn ballot(&self) -> Ballot {
        match self {
            Body::Prepare { ballot }
            | Body::Promise { ballot, .. }
            | Body::Propose { ballot, .. }
            | Body::Accept { ballot }
            | Body::Nack { ballot, .. } => *ballot,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Body::Prepare { .. } => "prepare",
            Body::Promise { .. } => "promise",
            Body::Propose { .. } => "propose",
            Body::Accept { .. } => "accept",
            Body::Nack { .. } => "nack",
        }
    }
}

impl From<AcceptorReply> for Body {
    fn from(r: AcceptorReply) -> Self {
        match r {
            AcceptorReply::Promise { ballot, accepted } => Body::Promise { ballot, accepted },
            AcceptorReply::Accept { ballot } => Body::Accept { ballot },
            AcceptorReply::Nack { ballot, promised } => Body::Nack { ballot, promised },
        }
    }
}

/// An addressed message. Canonical JSON puts `type` first and the
/// addresses last: `{"type":"propose","ballot":[1,0],"value":"a","src":"P0","dst":"A0"}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    #[serde(flatten)]
    pub body: Body,
    pub src: Node,
    pub dst: Node,
}

impl Message {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// An acceptor with an address.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Acceptor {
    pub id: AcceptorId,
    pub state: AcceptorState,
}

impl Acceptor {
    pub fn new(id: AcceptorId) -> Self {
        Acceptor {
            id,
            state: AcceptorState::default(),
        }
    }

    /// Handles a prepare or propose; other message types get no reply.
    pub fn handle(&mut self, msg: &Message) -> Option<Message> {
        let reply = match &msg.body {
            Body::Prepare { ballot } => self.state.handle_prepare(*ballot),
            Body::Propose { ballot, value } => self.state.handle_propose(*ballot, value),
            _ => return None,
        };
        Some(Message {
            body: reply.into(),
            src: Node::Acceptor(self.id),
            dst: msg.src,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("target set {targets:?} does not contain a phase-{phase} quorum")]
    NotAQuorum { targets: AcceptorSet, phase: u8 },
    #[error("no phase-2 quorum can be selected")]
    NoPhase2Targets,
    #[error("proposer has no value to propose")]
    NoCandidate,
    #[error(transparent)]
    Quorum(#[from] crate::quorum::QuorumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerPhase {
    Idle,
    Phase1,
    Phase2,
    Decided,
}

/// A single-decree proposer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proposer {
    pub id: ProposerId,
    ballot: Ballot,
    phase: ProposerPhase,
    promises: BTreeMap<AcceptorId, Option<Accepted>>,
    accepts: AcceptorSet,
    candidate: Option<Value>,
    chosen: Option<Value>,
    highest_seen: Ballot,
    selector: TargetSelector,
}

impl Proposer {
    /// A proposer that will use `ballot` on its first attempt and propose
    /// `candidate` if no earlier value must be adopted.
    pub fn new(ballot: Ballot, candidate: Option<Value>) -> Self {
        Proposer {
            id: ballot.proposer,
            ballot,
            phase: ProposerPhase::Idle,
            promises: BTreeMap::new(),
            accepts: AcceptorSet::empty(),
            candidate,
            chosen: None,
            highest_seen: ballot,
            selector: TargetSelector::default(),
        }
    }

    pub fn with_selector(mut self, selector: TargetSelector) -> Self {
        self.selector = selector;
        self
    }

    pub fn ballot(&self) -> Ballot {
        self.ballot
    }

    pub fn phase(&self) -> ProposerPhase {
        self.phase
    }

    pub fn promises(&self) -> &BTreeMap<AcceptorId, Option<Accepted>> {
        &self.promises
    }

    pub fn promise_senders(&self) -> AcceptorSet {
        self.promises.keys().copied().collect()
    }

    pub fn accepts(&self) -> AcceptorSet {
        self.accepts
    }

    /// The value sent in phase 2, once chosen.
    pub fn chosen_value(&self) -> Option<&Value> {
        self.chosen.as_ref()
    }

    pub fn candidate(&self) -> Option<&Value> {
        self.candidate.as_ref()
    }

    /// The decided value, if this proposer has learned one.
    pub fn decided(&self) -> Option<&Value> {
        match self.phase {
            ProposerPhase::Decided => self.chosen.as_ref(),
            _ => None,
        }
    }

    fn address(&self) -> Node {
        Node::Proposer(self.id)
    }

    /// Begins phase 1 at the current ballot, sending prepare to `targets`,
    /// which must contain a phase-1 quorum.
    pub fn start(
        &mut self,
        qs: &QuorumSystem,
        targets: AcceptorSet,
    ) -> Result<Vec<Message>, ProtocolError> {
        if !qs.is_q1(targets)? {
            return Err(ProtocolError::NotAQuorum { targets, phase: 1 });
        }
        self.phase = ProposerPhase::Phase1;
        self.promises.clear();
        self.accepts = AcceptorSet::empty();
        self.chosen = None;
        let src = self.address();
        Ok(targets
            .iter()
            .map(|a| Message {
                body: Body::Prepare {
                    ballot: self.ballot,
                },
                src,
                dst: Node::Acceptor(a),
            })
            .collect())
    }

    /// Moves to a fresh ballot above everything observed and restarts phase 1.
    pub fn retry(
        &mut self,
        qs: &QuorumSystem,
        targets: AcceptorSet,
    ) -> Result<Vec<Message>, ProtocolError> {
        self.ballot = Ballot::successor(Some(self.highest_seen.max(self.ballot)), self.id);
        self.highest_seen = self.ballot;
        self.start(qs, targets)
    }

    /// Records a promise. The first time the senders form a phase-1 quorum,
    /// picks the value of the highest-ballot accepted proposal among the
    /// promises (or the candidate if there is none) and proposes it to a
    /// phase-2 quorum chosen by the target selector.
    pub fn on_promise(
        &mut self,
        qs: &QuorumSystem,
        from: AcceptorId,
        ballot: Ballot,
        accepted: Option<Accepted>,
    ) -> Result<Vec<Message>, ProtocolError> {
        if ballot != self.ballot || self.phase != ProposerPhase::Phase1 {
            return Ok(Vec::new());
        }
        self.promises.insert(from, accepted);
        if !qs.is_q1(self.promise_senders())? {
            return Ok(Vec::new());
        }
        let adopted = self
            .promises
            .values()
            .flatten()
            .max_by(|a, b| a.ballot.cmp(&b.ballot))
            .map(|a| a.value.clone());
        let value = match adopted.or_else(|| self.candidate.clone()) {
            Some(v) => v,
            None => return Err(ProtocolError::NoCandidate),
        };
        let targets = self
            .selector
            .pick(qs, Phase::Two, AcceptorSet::empty())
            .ok_or(ProtocolError::NoPhase2Targets)?;
        self.chosen = Some(value.clone());
        self.phase = ProposerPhase::Phase2;
        let src = self.address();
        Ok(targets
            .iter()
            .map(|a| Message {
                body: Body::Propose {
                    ballot: self.ballot,
                    value: value.clone(),
                },
                src,
                dst: Node::Acceptor(a),
            })
            .collect())
    }

    /// Records an accept; returns true once the accept senders form a
    /// phase-2 quorum.
    pub fn on_accept(
        &mut self,
        qs: &QuorumSystem,
        from: AcceptorId,
        ballot: Ballot,
    ) -> Result<bool, ProtocolError> {
        if ballot != self.ballot {
            return Ok(self.phase == ProposerPhase::Decided);
        }
        match self.phase {
            ProposerPhase::Phase2 => {
                self.accepts.insert(from);
                if qs.is_q2(self.accepts)? {
                    self.phase = ProposerPhase::Decided;
                }
            }
            ProposerPhase::Decided => {
                self.accepts.insert(from);
            }
            _ => {}
        }
        Ok(self.phase == ProposerPhase::Decided)
    }

    /// Records a rejection. A nack for the current ballot before a decision
    /// sends the proposer back to idle; call [`Proposer::retry`] to go again.
    pub fn on_nack(&mut self, ballot: Ballot, promised: Ballot) {
        self.highest_seen = self.highest_seen.max(promised);
        if ballot == self.ballot
            && matches!(self.phase, ProposerPhase::Phase1 | ProposerPhase::Phase2)
        {
            self.phase = ProposerPhase::Idle;
        }
    }

    /// Dispatches a reply addressed to this proposer.
    pub fn handle(
        &mut self,
        qs: &QuorumSystem,
        msg: &Message,
    ) -> Result<Vec<Message>, ProtocolError> {
        let Node::Acceptor(from) = msg.src else {
            return Ok(Vec::new());
        };
        match &msg.body {
            Body::Promise { ballot, accepted } => {
                self.on_promise(qs, from, *ballot, accepted.clone())
            }
            Body::Accept { ballot } => {
                self.on_accept(qs, from, *ballot)?;
                Ok(Vec::new())
            }
            Body::Nack { ballot, promised } => {
                self.on_nack(*ballot, *promised);
                Ok(Vec::new())
            }
            _ => Ok(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("conflicting decisions: {first:?} and {second:?}")]
pub struct SafetyViolation {
    pub first: (Ballot, Value),
    pub second: (Ballot, Value),
}

/// Every `(ballot, value)` currently held as the accepted proposal by a
/// full phase-2 quorum, lowest ballot first.
pub fn decided_pairs<'a>(
    states: impl IntoIterator<Item = (AcceptorId, &'a AcceptorState)>,
    qs: &QuorumSystem,
) -> Vec<(Ballot, Value)> {
    let mut holders: BTreeMap<&Accepted, AcceptorSet> = BTreeMap::new();
    for (id, st) in states {
        if let Some(acc) = &st.accepted {
            holders.entry(acc).or_default().insert(id);
        }
    }
    holders
        .into_iter()
        .filter(|(_, who)| qs.contains_quorum(Phase::Two, *who))
        .map(|(acc, _)| (acc.ballot, acc.value.clone()))
        .collect()
}

/// The decision visible in the acceptors' current states, if any: a
/// `(ballot, value)` accepted by every member of some phase-2 quorum.
/// Two such pairs with different values are a safety violation.
pub fn learner_decided(
    states: &BTreeMap<AcceptorId, AcceptorState>,
    qs: &QuorumSystem,
) -> Result<Option<(Ballot, Value)>, SafetyViolation> {
    let pairs = decided_pairs(states.iter().map(|(k, v)| (*k, v)), qs);
    let mut it = pairs.into_iter();
    let Some(first) = it.next() else {
        return Ok(None);
    };
    for other in it {
        if other.1 != first.1 {
            return Err(SafetyViolation {
                first,
                second: other,
            });
        }
    }
    Ok(Some(first))
}
