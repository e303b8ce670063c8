//! Multi-Paxos over a slot-indexed log.
//!
//! Every [`Replica`] plays proposer, acceptor and learner. A replica becomes
//! leader by running one aggregated phase 1 covering every slot from its
//! first undecided slot onward; after that each client request costs one
//! phase-2 round on its own slot. Acceptor decisions reuse the single-decree
//! rules in [`crate::synod`] slot by slot.
//!
//! Replicas never look at clocks. They ask for timers through [`Effects`]
//! and the host (normally [`crate::sim`]) calls back into
//! [`Replica::on_timer`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quorum::{AcceptorId, AcceptorSet, Phase, QuorumSystem, TargetSelector, TargetStrategy};
use crate::synod::{AcceptorReply, AcceptorState};
use crate::types::{Accepted, Ballot, Node, ProposerId, Value};

/// One log position and the proposal accepted or decided there.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LogEntry {
    pub slot: u64,
    pub ballot: Ballot,
    pub value: Value,
}

/// Replica-to-replica and client messages.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Body {
    /// Phase 1 for every slot `>= from_slot`.
    Prepare {
        ballot: Ballot,
        from_slot: u64,
    },
    /// Everything accepted at slots `>= from_slot`.
    Promise {
        ballot: Ballot,
        from_slot: u64,
        accepted: Vec<LogEntry>,
    },
    Propose {
        slot: u64,
        ballot: Ballot,
        value: Value,
    },
    Accept {
        slot: u64,
        ballot: Ballot,
    },
    Nack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slot: Option<u64>,
        ballot: Ballot,
        promised: Ballot,
    },
    Request {
        id: u64,
        value: Value,
    },
    Response {
        id: u64,
        slot: u64,
        value: Value,
    },
    /// Not the leader; try `leader` if known.
    Redirect {
        id: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        leader: Option<AcceptorId>,
    },
    /// Window full; try again later.
    Busy {
        id: u64,
    },
}

impl Body {
    pub fn name(&self) -> &'static str {
        match self {
            Body::Prepare { .. } => "prepare",
            Body::Promise { .. } => "promise",
            Body::Propose { .. } => "propose",
            Body::Accept { .. } => "accept",
            Body::Nack { .. } => "nack",
            Body::Request { .. } => "request",
            Body::Response { .. } => "response",
            Body::Redirect { .. } => "redirect",
            Body::Busy { .. } => "busy",
        }
    }

    /// The slot a phase-2 message belongs to.
    pub fn slot(&self) -> Option<u64> {
        match self {
            Body::Propose { slot, .. } | Body::Accept { slot, .. } => Some(*slot),
            Body::Nack { slot, .. } => *slot,
            _ => None,
        }
    }

    pub fn is_client(&self) -> bool {
        matches!(
            self,
            Body::Request { .. }
                | Body::Response { .. }
                | Body::Redirect { .. }
                | Body::Busy { .. }
        )
    }
}

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

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "timer", rename_all = "snake_case")]
pub enum TimerTag {
    Prepare { ballot: Ballot },
    Proposal { ballot: Ballot, slot: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timer {
    pub delay_us: u64,
    pub tag: TimerTag,
}

/// Everything a replica wants the host to do after one transition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effects {
    pub messages: Vec<Message>,
    pub timers: Vec<Timer>,
    /// Slots this replica learned as decided.
    pub decided: Vec<LogEntry>,
    /// Set when phase 1 completed and this replica now leads.
    pub elected: Option<Ballot>,
    /// Inputs dropped as malformed or misaddressed.
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubmitError {
    #[error("not the leader")]
    Redirect { leader: Option<AcceptorId> },
    #[error("window of {window} requests is full")]
    Backpressure { window: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaConfig {
    /// Client requests in progress at once.
    pub window: usize,
    /// Send phase-1 and phase-2 messages to every acceptor instead of a quorum.
    pub send_to_all: bool,
    pub strategy: TargetStrategy,
    pub prepare_timeout_us: u64,
    pub proposal_timeout_us: u64,
}

impl Default for ReplicaConfig {
    fn default() -> Self {
        ReplicaConfig {
            window: 10,
            send_to_all: false,
            strategy: TargetStrategy::FixedFirst,
            prepare_timeout_us: 100_000,
            proposal_timeout_us: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Inflight {
    value: Value,
    accepts: AcceptorSet,
    targets: AcceptorSet,
    request: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Role {
    Follower {
        leader: Option<AcceptorId>,
    },
    Candidate {
        ballot: Ballot,
        from_slot: u64,
        promises: BTreeMap<AcceptorId, Vec<LogEntry>>,
    },
    Leader {
        ballot: Ballot,
        next_slot: u64,
        inflight: BTreeMap<u64, Inflight>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleName {
    Follower,
    Candidate,
    Leader,
}

/// A replica: acceptor state per slot, a learned log, and a proposer role.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replica {
    id: AcceptorId,
    cfg: ReplicaConfig,
    promised: Option<Ballot>,
    accepted: BTreeMap<u64, Accepted>,
    log: BTreeMap<u64, (Ballot, Value)>,
    role: Role,
    highest_seen: Option<Ballot>,
    selector: TargetSelector,
    suspected: AcceptorSet,
}

impl Replica {
    pub fn new(id: AcceptorId, cfg: ReplicaConfig) -> Self {
        let selector = TargetSelector::new(cfg.strategy.clone());
        Replica {
            id,
            cfg,
            promised: None,
            accepted: BTreeMap::new(),
            log: BTreeMap::new(),
            role: Role::Follower { leader: None },
            highest_seen: None,
            selector,
            suspected: AcceptorSet::empty(),
        }
    }

    pub fn id(&self) -> AcceptorId {
        self.id
    }

    pub fn config(&self) -> &ReplicaConfig {
        &self.cfg
    }

    fn node(&self) -> Node {
        Node::Replica(self.id)
    }

    pub fn role(&self) -> RoleName {
        match self.role {
            Role::Follower { .. } => RoleName::Follower,
            Role::Candidate { .. } => RoleName::Candidate,
            Role::Leader { .. } => RoleName::Leader,
        }
    }

    pub fn is_leader(&self) -> bool {
        matches!(self.role, Role::Leader { .. })
    }

    /// The ballot this replica leads or campaigns with.
    pub fn ballot(&self) -> Option<Ballot> {
        match &self.role {
            Role::Follower { .. } => None,
            Role::Candidate { ballot, .. } | Role::Leader { ballot, .. } => Some(*ballot),
        }
    }

    pub fn promised(&self) -> Option<Ballot> {
        self.promised
    }

    /// The single-decree acceptor state for `slot`.
    pub fn slot_state(&self, slot: u64) -> AcceptorState {
        AcceptorState {
            promised: self.promised,
            accepted: self.accepted.get(&slot).cloned(),
        }
    }

    /// Slots this replica holds an accepted proposal for.
    pub fn accepted_slots(&self) -> impl Iterator<Item = u64> + '_ {
        self.accepted.keys().copied()
    }

    pub fn decided(&self, slot: u64) -> Option<&Value> {
        self.log.get(&slot).map(|(_, v)| v)
    }

    /// The learned log as `{slot, ballot, value}` entries.
    pub fn log_dump(&self) -> Vec<LogEntry> {
        self.log
            .iter()
            .map(|(slot, (ballot, value))| LogEntry {
                slot: *slot,
                ballot: *ballot,
                value: value.clone(),
            })
            .collect()
    }

    /// Client requests awaiting a decision.
    pub fn open_requests(&self) -> usize {
        match &self.role {
            Role::Leader { inflight, .. } => {
                inflight.values().filter(|i| i.request.is_some()).count()
            }
            _ => 0,
        }
    }

    pub fn suspected(&self) -> AcceptorSet {
        self.suspected
    }

    fn first_undecided(&self) -> u64 {
        let mut s = 0;
        for &slot in self.log.keys() {
            if slot != s {
                break;
            }
            s += 1;
        }
        s
    }

    fn observe(&mut self, b: Ballot) {
        self.highest_seen = Some(self.highest_seen.map_or(b, |h| h.max(b)));
    }

    /// Forgets proposer state, keeping the acceptor state and learned log.
    /// Models a crash where stable storage survives.
    pub fn reset_volatile(&mut self) {
        self.role = Role::Follower { leader: None };
        self.suspected = AcceptorSet::empty();
    }

    fn targets(&mut self, qs: &QuorumSystem, phase: Phase) -> AcceptorSet {
        if self.cfg.send_to_all {
            return qs.universe();
        }
        self.selector
            .pick(qs, phase, self.suspected)
            .unwrap_or_else(|| qs.universe())
    }

    fn send(&self, to: AcceptorId, body: Body) -> Message {
        Message {
            body,
            src: self.node(),
            dst: Node::Replica(to),
        }
    }

    /// Starts an aggregated phase 1 at a fresh ballot.
    pub fn become_leader(&mut self, qs: &QuorumSystem) -> Effects {
        let ballot = Ballot::successor(self.highest_seen, ProposerId(self.id.0));
        self.observe(ballot);
        let from_slot = self.first_undecided();
        self.role = Role::Candidate {
            ballot,
            from_slot,
            promises: BTreeMap::new(),
        };
        let targets = self.targets(qs, Phase::One);
        let mut fx = Effects::default();
        for a in targets.iter() {
            fx.messages
                .push(self.send(a, Body::Prepare { ballot, from_slot }));
        }
        fx.timers.push(Timer {
            delay_us: self.cfg.prepare_timeout_us,
            tag: TimerTag::Prepare { ballot },
        });
        fx
    }

    /// Assigns the next slot to a client request and proposes it.
    pub fn submit(
        &mut self,
        qs: &QuorumSystem,
        id: u64,
        value: Value,
    ) -> Result<Effects, SubmitError> {
        match &self.role {
            Role::Follower { leader } => return Err(SubmitError::Redirect { leader: *leader }),
            Role::Candidate { .. } => {
                return Err(SubmitError::Redirect {
                    leader: Some(self.id),
                })
            }
            Role::Leader { .. } => {}
        }
        if self.open_requests() >= self.cfg.window {
            return Err(SubmitError::Backpressure {
                window: self.cfg.window,
            });
        }
        let Role::Leader { next_slot, .. } = &mut self.role else {
            unreachable!()
        };
        let slot = *next_slot;
        *next_slot += 1;
        let mut fx = Effects::default();
        self.propose_slot(qs, slot, value, Some(id), &mut fx);
        Ok(fx)
    }

    fn propose_slot(
        &mut self,
        qs: &QuorumSystem,
        slot: u64,
        value: Value,
        request: Option<u64>,
        fx: &mut Effects,
    ) {
        let targets = self.targets(qs, Phase::Two);
        let Role::Leader {
            ballot, inflight, ..
        } = &mut self.role
        else {
            return;
        };
        let ballot = *ballot;
        inflight.insert(
            slot,
            Inflight {
                value: value.clone(),
                accepts: AcceptorSet::empty(),
                targets,
                request,
            },
        );
        for a in targets.iter() {
            fx.messages.push(self.send(
                a,
                Body::Propose {
                    slot,
                    ballot,
                    value: value.clone(),
                },
            ));
        }
        fx.timers.push(Timer {
            delay_us: self.cfg.proposal_timeout_us,
            tag: TimerTag::Proposal { ballot, slot },
        });
    }

    /// Dispatches one incoming message.
    pub fn on_message(&mut self, qs: &QuorumSystem, msg: &Message) -> Effects {
        let mut fx = Effects::default();
        if msg.dst != self.node() {
            fx.dropped
                .push(format!("misaddressed message for {}", msg.dst));
            return fx;
        }
        if let Body::Request { id, value } = &msg.body {
            if msg.src != Node::Client {
                fx.dropped
                    .push(format!("request from non-client {}", msg.src));
                return fx;
            }
            let reply = match self.submit(qs, *id, value.clone()) {
                Ok(out) => return out,
                Err(SubmitError::Redirect { leader }) => Body::Redirect { id: *id, leader },
                Err(SubmitError::Backpressure { .. }) => Body::Busy { id: *id },
            };
            fx.messages.push(Message {
                body: reply,
                src: self.node(),
                dst: Node::Client,
            });
            return fx;
        }
        let from = match msg.src {
            Node::Replica(a) if a.index() < qs.n() => a,
            other => {
                fx.dropped
                    .push(format!("protocol message from unknown sender {other}"));
                return fx;
            }
        };
        self.suspected.remove(from);
        match &msg.body {
            Body::Prepare { ballot, from_slot } => {
                self.on_prepare(from, *ballot, *from_slot, &mut fx)
            }
            Body::Propose {
                slot,
                ballot,
                value,
            } => self.on_propose(from, *slot, *ballot, value, &mut fx),
            Body::Promise {
                ballot,
                from_slot,
                accepted,
            } => self.on_promise(qs, from, *ballot, *from_slot, accepted, &mut fx),
            Body::Accept { slot, ballot } => self.on_accept(qs, from, *slot, *ballot, &mut fx),
            Body::Nack {
                ballot, promised, ..
            } => self.on_nack(qs, *ballot, *promised, &mut fx),
            other => fx
                .dropped
                .push(format!("unexpected {} at replica", other.name())),
        }
        fx
    }

    fn step_down_below(&mut self, promised: Ballot) {
        if let Some(mine) = self.ballot() {
            if mine < promised {
                self.role = Role::Follower {
                    leader: Some(AcceptorId(promised.proposer.0)),
                };
            }
        }
    }

    fn on_prepare(&mut self, from: AcceptorId, ballot: Ballot, from_slot: u64, fx: &mut Effects) {
        self.observe(ballot);
        let mut view = AcceptorState {
            promised: self.promised,
            accepted: None,
        };
        let body = match view.handle_prepare(ballot) {
            AcceptorReply::Promise { ballot, .. } => {
                self.promised = view.promised;
                self.step_down_below(ballot);
                if let Role::Follower { leader } = &mut self.role {
                    *leader = Some(from);
                }
                let accepted = self
                    .accepted
                    .range(from_slot..)
                    .map(|(slot, acc)| LogEntry {
                        slot: *slot,
                        ballot: acc.ballot,
                        value: acc.value.clone(),
                    })
                    .collect();
                Body::Promise {
                    ballot,
                    from_slot,
                    accepted,
                }
            }
            AcceptorReply::Nack { ballot, promised } => Body::Nack {
                slot: None,
                ballot,
                promised,
            },
            AcceptorReply::Accept { .. } => unreachable!("prepare never accepts"),
        };
        fx.messages.push(self.send(from, body));
    }

    fn on_propose(
        &mut self,
        from: AcceptorId,
        slot: u64,
        ballot: Ballot,
        value: &Value,
        fx: &mut Effects,
    ) {
        self.observe(ballot);
        let mut view = self.slot_state(slot);
        let body = match view.handle_propose(ballot, value) {
            AcceptorReply::Accept { ballot } => {
                self.promised = view.promised;
                if let Some(acc) = view.accepted {
                    self.accepted.insert(slot, acc);
                }
                self.step_down_below(ballot);
                Body::Accept { slot, ballot }
            }
            AcceptorReply::Nack { ballot, promised } => Body::Nack {
                slot: Some(slot),
                ballot,
                promised,
            },
            AcceptorReply::Promise { .. } => unreachable!("propose never promises"),
        };
        fx.messages.push(self.send(from, body));
    }

    fn on_promise(
        &mut self,
        qs: &QuorumSystem,
        from: AcceptorId,
        ballot: Ballot,
        from_slot: u64,
        accepted: &[LogEntry],
        fx: &mut Effects,
    ) {
        let Role::Candidate {
            ballot: mine,
            from_slot: my_from,
            promises,
        } = &mut self.role
        else {
            return;
        };
        if ballot != *mine || from_slot != *my_from {
            return;
        }
        promises.insert(from, accepted.to_vec());
        let senders: AcceptorSet = promises.keys().copied().collect();
        if !qs.contains_quorum(Phase::One, senders) {
            return;
        }
        // Highest-ballot accepted proposal per slot among the quorum.
        let mut adopt: BTreeMap<u64, Accepted> = BTreeMap::new();
        for entry in promises.values().flatten() {
            if entry.slot < *my_from {
                continue;
            }
            let cand = Accepted::new(entry.ballot, entry.value.clone());
            match adopt.get(&entry.slot) {
                Some(cur) if cur.ballot >= cand.ballot => {}
                _ => {
                    adopt.insert(entry.slot, cand);
                }
            }
        }
        let from_slot = *my_from;
        let top = adopt.keys().next_back().map_or(from_slot, |s| s + 1);
        let own_top = self.log.keys().next_back().map_or(0, |s| s + 1);
        self.role = Role::Leader {
            ballot,
            next_slot: top.max(own_top).max(from_slot),
            inflight: BTreeMap::new(),
        };
        fx.elected = Some(ballot);
        for slot in from_slot..top {
            if self.log.contains_key(&slot) {
                continue;
            }
            // Gaps below the highest reported slot are filled with no-ops.
            let value = adopt.remove(&slot).map(|a| a.value).unwrap_or_default();
            self.propose_slot(qs, slot, value, None, fx);
        }
    }

    fn on_accept(
        &mut self,
        qs: &QuorumSystem,
        from: AcceptorId,
        slot: u64,
        ballot: Ballot,
        fx: &mut Effects,
    ) {
        let Role::Leader {
            ballot: mine,
            inflight,
            ..
        } = &mut self.role
        else {
            return;
        };
        if ballot != *mine {
            return;
        }
        let Some(pending) = inflight.get_mut(&slot) else {
            return;
        };
        pending.accepts.insert(from);
        if !qs.contains_quorum(Phase::Two, pending.accepts) {
            return;
        }
        let done = inflight.remove(&slot).expect("present");
        self.log.insert(slot, (ballot, done.value.clone()));
        fx.decided.push(LogEntry {
            slot,
            ballot,
            value: done.value.clone(),
        });
        if let Some(id) = done.request {
            fx.messages.push(Message {
                body: Body::Response {
                    id,
                    slot,
                    value: done.value,
                },
                src: self.node(),
                dst: Node::Client,
            });
        }
    }

    fn on_nack(&mut self, qs: &QuorumSystem, ballot: Ballot, promised: Ballot, fx: &mut Effects) {
        self.observe(promised);
        let Some(mine) = self.ballot() else {
            return;
        };
        if ballot != mine || promised <= mine {
            return;
        }
        match self.role {
            Role::Candidate { .. } => {
                let retry = self.become_leader(qs);
                fx.messages.extend(retry.messages);
                fx.timers.extend(retry.timers);
            }
            _ => {
                self.role = Role::Follower {
                    leader: Some(AcceptorId(promised.proposer.0)),
                };
            }
        }
    }

    /// Handles an expired timer: resend to every acceptor that has not
    /// answered yet and suspect the silent ones.
    pub fn on_timer(&mut self, qs: &QuorumSystem, tag: TimerTag) -> Effects {
        let mut fx = Effects::default();
        let universe = qs.universe();
        match tag {
            TimerTag::Prepare { ballot } => {
                let Role::Candidate {
                    ballot: mine,
                    from_slot,
                    promises,
                } = &self.role
                else {
                    return fx;
                };
                if *mine != ballot {
                    return fx;
                }
                let answered: AcceptorSet = promises.keys().copied().collect();
                let silent = universe.difference(answered);
                let from_slot = *from_slot;
                self.suspected = self.suspected.union(silent);
                for a in silent.iter() {
                    fx.messages
                        .push(self.send(a, Body::Prepare { ballot, from_slot }));
                }
                fx.timers.push(Timer {
                    delay_us: self.cfg.prepare_timeout_us,
                    tag,
                });
            }
            TimerTag::Proposal { ballot, slot } => {
                let Role::Leader {
                    ballot: mine,
                    inflight,
                    ..
                } = &mut self.role
                else {
                    return fx;
                };
                if *mine != ballot {
                    return fx;
                }
                let Some(pending) = inflight.get_mut(&slot) else {
                    return fx;
                };
                let silent_targets = pending.targets.difference(pending.accepts);
                let resend = universe.difference(pending.accepts);
                pending.targets = universe;
                let value = pending.value.clone();
                self.suspected = self.suspected.union(silent_targets);
                for a in resend.iter() {
                    fx.messages.push(self.send(
                        a,
                        Body::Propose {
                            slot,
                            ballot,
                            value: value.clone(),
                        },
                    ));
                }
                fx.timers.push(Timer {
                    delay_us: self.cfg.proposal_timeout_us,
                    tag,
                });
            }
        }
        fx
    }
}
