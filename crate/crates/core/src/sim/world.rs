use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::multi::{Body, Effects, Message, Replica, ReplicaConfig, TimerTag};
use crate::quorum::{AcceptorId, QuorumSystem};
use crate::synod::{learner_decided, AcceptorState};
use crate::types::{Ballot, Node, Value};

use super::config::{LatencyModel, SimConfig};
use super::trace::{DropReason, EventKind, Trace};
use super::SimError;

const US_PER_MS: u64 = 1_000;

fn ms_to_us(ms: f64) -> u64 {
    (ms * US_PER_MS as f64).round() as u64
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Event {
    Deliver(Message),
    Timer {
        replica: usize,
        incarnation: u64,
        tag: TimerTag,
    },
    Crash {
        replica: usize,
        lose_memory: bool,
    },
    Restore {
        replica: usize,
    },
    Partition {
        groups: Vec<Vec<u32>>,
    },
    Elect {
        replica: usize,
    },
    ClientSend {
        id: u64,
    },
    ClientTimeout {
        id: u64,
        attempt: u32,
    },
    ClientResend {
        id: u64,
        attempt: u32,
    },
}

#[derive(Debug, PartialEq, Eq)]
struct Scheduled {
    time: u64,
    seq: u64,
    event: Event,
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionRecord {
    pub t_us: u64,
    pub replica: u32,
    pub ballot: Ballot,
}

/// A client request answered by a replica.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub t_us: u64,
    pub latency_us: u64,
    pub id: u64,
    pub slot: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Distinct slots decided anywhere in the run.
    pub committed_slots: u64,
    /// Client responses received inside the steady window.
    pub commits_in_window: u64,
    /// Requests per second over the steady window.
    pub throughput: f64,
    pub mean_latency_ms: Option<f64>,
    pub median_latency_ms: Option<f64>,
    pub p99_latency_ms: Option<f64>,
    /// Replica-to-replica messages for a committed slot, averaged over the window.
    pub protocol_msgs_per_commit: Option<f64>,
    /// As above plus client request and reply traffic.
    pub msgs_per_commit: Option<f64>,
    pub phase1_messages: u64,
    pub messages_by_type: BTreeMap<String, u64>,
    pub dropped_messages: u64,
    /// Messages sent plus messages delivered, per replica.
    pub per_replica_load: Vec<u64>,
    pub elections: Vec<ElectionRecord>,
}

/// Everything a run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    pub metrics: RunMetrics,
    pub commits: Vec<CommitRecord>,
    pub trace: Trace<Message>,
}

impl SimOutput {
    /// Client commits with `from_ms <= t < to_ms`.
    pub fn commits_between(&self, from_ms: u64, to_ms: u64) -> usize {
        let (a, b) = (from_ms * US_PER_MS, to_ms * US_PER_MS);
        self.commits
            .iter()
            .filter(|c| c.t_us >= a && c.t_us < b)
            .count()
    }
}

#[derive(Clone, Debug)]
struct Outstanding {
    sent_us: u64,
    attempt: u32,
    target: usize,
}

struct Client {
    next_id: u64,
    outstanding: BTreeMap<u64, Outstanding>,
    target: usize,
}

pub(super) struct World {
    cfg: SimConfig,
    qs: QuorumSystem,
    now: u64,
    seq: u64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    replicas: Vec<Replica>,
    rcfg: Vec<ReplicaConfig>,
    crashed: Vec<Option<bool>>,
    incarnation: Vec<u64>,
    group: Vec<usize>,
    link_us: Vec<Vec<u64>>,
    rng: ChaCha8Rng,
    client: Client,
    trace: Trace<Message>,
    chosen: BTreeMap<u64, (Ballot, Value)>,
    commits: Vec<CommitRecord>,
    by_type: BTreeMap<String, u64>,
    slot_msgs: HashMap<u64, u64>,
    request_msgs: HashMap<u64, u64>,
    phase1: u64,
    dropped: u64,
    load: Vec<u64>,
    elections: Vec<ElectionRecord>,
}

impl World {
    pub(super) fn new(cfg: SimConfig) -> Self {
        let n = cfg.n();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut link_us = vec![vec![0u64; n]; n];
        if let LatencyModel::Heterogeneous { min_ms, max_ms } = cfg.latency {
            for (a, b) in (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))) {
                let ms = if max_ms > min_ms {
                    rng.gen_range(min_ms..max_ms)
                } else {
                    min_ms
                };
                link_us[a][b] = ms_to_us(ms);
                link_us[b][a] = link_us[a][b];
            }
        } else {
            let mean = match cfg.latency {
                LatencyModel::Fixed { ms } => ms,
                LatencyModel::Uniform { min_ms, max_ms } => (min_ms + max_ms) / 2.0,
                LatencyModel::Heterogeneous { .. } => unreachable!(),
            };
            for (a, row) in link_us.iter_mut().enumerate() {
                for (b, cell) in row.iter_mut().enumerate() {
                    if a != b {
                        *cell = ms_to_us(mean);
                    }
                }
            }
        }
        let rcfg: Vec<ReplicaConfig> = (0..n)
            .map(|i| ReplicaConfig {
                window: cfg.window,
                send_to_all: cfg.send_to_all,
                strategy: cfg.strategy_for(i, &link_us),
                prepare_timeout_us: cfg.prepare_timeout_ms * US_PER_MS,
                proposal_timeout_us: cfg.proposal_timeout_ms * US_PER_MS,
            })
            .collect();
        let replicas = (0..n)
            .map(|i| Replica::new(AcceptorId(i as u32), rcfg[i].clone()))
            .collect();
        let client_target = cfg.initial_leader.unwrap_or(0) as usize;
        World {
            qs: cfg.quorum.clone(),
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            replicas,
            rcfg,
            crashed: vec![None; n],
            incarnation: vec![0; n],
            group: vec![0; n],
            link_us,
            rng,
            client: Client {
                next_id: 0,
                outstanding: BTreeMap::new(),
                target: client_target,
            },
            trace: Trace::default(),
            chosen: BTreeMap::new(),
            commits: Vec::new(),
            by_type: BTreeMap::new(),
            slot_msgs: HashMap::new(),
            request_msgs: HashMap::new(),
            phase1: 0,
            dropped: 0,
            load: vec![0; n],
            elections: Vec::new(),
            cfg,
        }
    }

    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Reverse(Scheduled {
            time,
            seq: self.seq,
            event,
        }));
    }

    fn record(&mut self, kind: EventKind<Message>) {
        if self.cfg.record_trace {
            self.trace.push(self.now, kind);
        }
    }

    pub(super) fn run(mut self) -> Result<SimOutput, SimError> {
        let ms = |t: u64| t * US_PER_MS;
        for p in self.cfg.partitions.clone() {
            self.schedule(ms(p.t_ms), Event::Partition { groups: p.groups });
        }
        for c in self.cfg.crashes.clone() {
            self.schedule(
                ms(c.t_ms),
                Event::Crash {
                    replica: c.replica as usize,
                    lose_memory: c.lose_memory,
                },
            );
        }
        for r in self.cfg.restores.clone() {
            self.schedule(
                ms(r.t_ms),
                Event::Restore {
                    replica: r.replica as usize,
                },
            );
        }
        if let Some(r) = self.cfg.initial_leader {
            self.schedule(
                0,
                Event::Elect {
                    replica: r as usize,
                },
            );
        }
        for e in self.cfg.elections.clone() {
            self.schedule(
                ms(e.t_ms),
                Event::Elect {
                    replica: e.replica as usize,
                },
            );
        }
        for _ in 0..self.cfg.window {
            let id = self.client.next_id;
            self.client.next_id += 1;
            self.schedule(0, Event::ClientSend { id });
        }

        let end = ms(self.cfg.duration_ms);
        while let Some(Reverse(next)) = self.queue.pop() {
            if next.time > end {
                break;
            }
            self.now = next.time;
            self.step(next.event)?;
        }
        Ok(self.finish())
    }

    fn step(&mut self, event: Event) -> Result<(), SimError> {
        match event {
            Event::Deliver(msg) => self.deliver(msg)?,
            Event::Timer {
                replica,
                incarnation,
                tag,
            } => {
                if self.crashed[replica].is_none() && self.incarnation[replica] == incarnation {
                    let fx = self.replicas[replica].on_timer(&self.qs, tag);
                    self.apply(replica, fx)?;
                }
            }
            Event::Crash {
                replica,
                lose_memory,
            } => {
                if self.crashed[replica].is_none() {
                    self.crashed[replica] = Some(lose_memory);
                    self.incarnation[replica] += 1;
                    self.record(EventKind::Crash {
                        replica: replica as u32,
                        lose_memory,
                    });
                }
            }
            Event::Restore { replica } => {
                if let Some(lost) = self.crashed[replica].take() {
                    if lost {
                        self.replicas[replica] =
                            Replica::new(AcceptorId(replica as u32), self.rcfg[replica].clone());
                    } else {
                        self.replicas[replica].reset_volatile();
                    }
                    self.record(EventKind::Restore {
                        replica: replica as u32,
                    });
                }
            }
            Event::Partition { groups } => {
                let extra = groups.len();
                self.group = vec![extra; self.cfg.n()];
                for (g, members) in groups.iter().enumerate() {
                    for &r in members {
                        self.group[r as usize] = g;
                    }
                }
                self.record(EventKind::Partition { groups });
            }
            Event::Elect { replica } => {
                self.record(EventKind::Elect {
                    replica: replica as u32,
                });
                if self.crashed[replica].is_none() {
                    let fx = self.replicas[replica].become_leader(&self.qs);
                    self.apply(replica, fx)?;
                }
            }
            Event::ClientSend { id } => {
                if self.now < self.cfg.duration_ms * US_PER_MS {
                    let target = self.client.target;
                    self.client.outstanding.insert(
                        id,
                        Outstanding {
                            sent_us: self.now,
                            attempt: 0,
                            target,
                        },
                    );
                    self.send_request(id);
                }
            }
            Event::ClientTimeout { id, attempt } => {
                let n = self.cfg.n();
                let Some(o) = self.client.outstanding.get_mut(&id) else {
                    return Ok(());
                };
                if o.attempt != attempt {
                    return Ok(());
                }
                o.attempt += 1;
                o.target = (o.target + 1) % n;
                self.client.target = o.target;
                self.record(EventKind::ClientTimeout { id });
                self.send_request(id);
            }
            Event::ClientResend { id, attempt } => {
                if self
                    .client
                    .outstanding
                    .get(&id)
                    .is_some_and(|o| o.attempt == attempt)
                {
                    self.send_request(id);
                }
            }
        }
        Ok(())
    }

    fn request_value(&self, id: u64) -> Value {
        let mut bytes = format!("req-{id}").into_bytes();
        bytes.resize(bytes.len().max(self.cfg.request_bytes), b'.');
        Value::new(bytes)
    }

    fn send_request(&mut self, id: u64) {
        let o = self.client.outstanding[&id].clone();
        let msg = Message {
            body: Body::Request {
                id,
                value: self.request_value(id),
            },
            src: Node::Client,
            dst: Node::Replica(AcceptorId(o.target as u32)),
        };
        self.send(msg);
        let at = self.now + self.cfg.client_timeout_ms * US_PER_MS;
        self.schedule(
            at,
            Event::ClientTimeout {
                id,
                attempt: o.attempt,
            },
        );
    }

    /// Sends `id` again after the retry delay, to `target` or the next replica.
    fn client_retry(&mut self, id: u64, target: Option<usize>) {
        let n = self.cfg.n();
        let Some(o) = self.client.outstanding.get_mut(&id) else {
            return;
        };
        o.attempt += 1;
        o.target = target.unwrap_or((o.target + 1) % n);
        self.client.target = o.target;
        let attempt = o.attempt;
        let at = self.now + self.cfg.client_retry_ms * US_PER_MS;
        self.schedule(at, Event::ClientResend { id, attempt });
    }

    fn delay(&mut self, src: Node, dst: Node) -> u64 {
        match (src, dst) {
            (Node::Replica(a), Node::Replica(b)) if a == b => 0,
            (Node::Replica(a), Node::Replica(b)) => match self.cfg.latency {
                LatencyModel::Uniform { min_ms, max_ms } if max_ms > min_ms => {
                    ms_to_us(self.rng.gen_range(min_ms..max_ms))
                }
                _ => self.link_us[a.index()][b.index()],
            },
            _ => ms_to_us(self.cfg.client_latency_ms),
        }
    }

    fn is_network(src: Node, dst: Node) -> bool {
        matches!((src, dst), (Node::Replica(a), Node::Replica(b)) if a != b)
    }

    fn send(&mut self, msg: Message) {
        *self.by_type.entry(msg.body.name().to_string()).or_default() += 1;
        if let Node::Replica(r) = msg.src {
            self.load[r.index()] += 1;
        }
        match (&msg.body, msg.body.slot()) {
            (Body::Request { id, .. }, _)
            | (Body::Response { id, .. }, _)
            | (Body::Redirect { id, .. }, _)
            | (Body::Busy { id }, _) => *self.request_msgs.entry(*id).or_default() += 1,
            (_, Some(slot)) => *self.slot_msgs.entry(slot).or_default() += 1,
            (_, None) => self.phase1 += 1,
        }
        self.record(EventKind::Send { msg: msg.clone() });
        let network = Self::is_network(msg.src, msg.dst);
        if network && self.cfg.loss > 0.0 && self.rng.gen_bool(self.cfg.loss) {
            self.dropped += 1;
            self.record(EventKind::Drop {
                msg,
                reason: DropReason::Loss,
            });
            return;
        }
        if network && self.cfg.duplicate > 0.0 && self.rng.gen_bool(self.cfg.duplicate) {
            let d = self.delay(msg.src, msg.dst);
            self.record(EventKind::Duplicate { msg: msg.clone() });
            self.schedule(self.now + d, Event::Deliver(msg.clone()));
        }
        let d = self.delay(msg.src, msg.dst);
        self.schedule(self.now + d, Event::Deliver(msg));
    }

    fn deliver(&mut self, msg: Message) -> Result<(), SimError> {
        match msg.dst {
            Node::Client => {
                self.record(EventKind::Deliver { msg: msg.clone() });
                self.on_client(msg)
            }
            Node::Replica(r) => {
                let r = r.index();
                let reason = if self.crashed[r].is_some() {
                    Some(DropReason::Crashed)
                } else if matches!(msg.src, Node::Replica(s) if self.group[s.index()] != self.group[r])
                {
                    Some(DropReason::Partition)
                } else {
                    None
                };
                if let Some(reason) = reason {
                    self.dropped += 1;
                    self.record(EventKind::Drop { msg, reason });
                    return Ok(());
                }
                self.load[r] += 1;
                self.record(EventKind::Deliver { msg: msg.clone() });
                let fx = self.replicas[r].on_message(&self.qs, &msg);
                if let Body::Propose { slot, .. } = msg.body {
                    if fx
                        .messages
                        .iter()
                        .any(|m| matches!(m.body, Body::Accept { .. }))
                    {
                        self.check_slot(slot)?;
                    }
                }
                self.apply(r, fx)
            }
            _ => Ok(()),
        }
    }

    fn violation(&self, detail: String) -> SimError {
        SimError::SafetyViolation {
            detail,
            trace: Box::new(self.trace.clone()),
        }
    }

    /// Recomputes the decision of `slot` from every acceptor's state and
    /// compares it with everything decided there before.
    fn check_slot(&mut self, slot: u64) -> Result<(), SimError> {
        let states: BTreeMap<AcceptorId, AcceptorState> = self
            .replicas
            .iter()
            .map(|r| (r.id(), r.slot_state(slot)))
            .collect();
        match learner_decided(&states, &self.qs) {
            Err(v) => Err(self.violation(format!("slot {slot}: {v}"))),
            Ok(None) => Ok(()),
            Ok(Some((b, v))) => self.note_decision(slot, b, v),
        }
    }

    fn note_decision(&mut self, slot: u64, b: Ballot, v: Value) -> Result<(), SimError> {
        match self.chosen.get(&slot) {
            Some((b0, v0)) if *v0 != v => Err(self.violation(format!(
                "slot {slot}: decided {v0:?} at {b0} and later {v:?} at {b}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.chosen.insert(slot, (b, v));
                Ok(())
            }
        }
    }

    fn apply(&mut self, replica: usize, fx: Effects) -> Result<(), SimError> {
        if let Some(ballot) = fx.elected {
            self.elections.push(ElectionRecord {
                t_us: self.now,
                replica: replica as u32,
                ballot,
            });
            self.record(EventKind::Elected {
                replica: replica as u32,
                ballot,
            });
        }
        for d in fx.decided {
            self.record(EventKind::Decide {
                node: Node::Replica(AcceptorId(replica as u32)),
                slot: Some(d.slot),
                ballot: d.ballot,
                value: d.value.clone(),
            });
            self.note_decision(d.slot, d.ballot, d.value)?;
        }
        for t in fx.timers {
            let incarnation = self.incarnation[replica];
            self.schedule(
                self.now + t.delay_us,
                Event::Timer {
                    replica,
                    incarnation,
                    tag: t.tag,
                },
            );
        }
        for m in fx.messages {
            self.send(m);
        }
        Ok(())
    }

    fn on_client(&mut self, msg: Message) -> Result<(), SimError> {
        match msg.body {
            Body::Response { id, slot, value } => {
                let Some(o) = self.client.outstanding.remove(&id) else {
                    return Ok(());
                };
                match self.chosen.get(&slot) {
                    Some((_, v)) if *v == value => {}
                    other => {
                        return Err(self.violation(format!(
                        "response for request {id} carries {value:?} but slot {slot} holds {:?}",
                        other.map(|(_, v)| v)
                    )))
                    }
                }
                if let Node::Replica(r) = msg.src {
                    self.client.target = r.index();
                }
                self.commits.push(CommitRecord {
                    t_us: self.now,
                    latency_us: self.now - o.sent_us,
                    id,
                    slot,
                });
                let next = self.client.next_id;
                self.client.next_id += 1;
                self.step(Event::ClientSend { id: next })?;
            }
            Body::Redirect { id, leader } => {
                let hint = leader.map(|a| a.index()).filter(|&a| a < self.cfg.n());
                self.client_retry(id, hint);
            }
            Body::Busy { id } => {
                let same = self.client.outstanding.get(&id).map(|o| o.target);
                self.client_retry(id, same);
            }
            _ => {}
        }
        Ok(())
    }

    fn finish(self) -> SimOutput {
        let from = self.cfg.warmup_ms * US_PER_MS;
        let to = (self.cfg.duration_ms - self.cfg.cooldown_ms) * US_PER_MS;
        let window: Vec<&CommitRecord> = self
            .commits
            .iter()
            .filter(|c| c.t_us >= from && c.t_us < to)
            .collect();
        let k = window.len();
        let mut lat: Vec<u64> = window.iter().map(|c| c.latency_us).collect();
        lat.sort_unstable();
        let as_ms = |us: u64| us as f64 / US_PER_MS as f64;
        let (mean, median, p99) = if k == 0 {
            (None, None, None)
        } else {
            let mean = lat.iter().sum::<u64>() as f64 / k as f64 / US_PER_MS as f64;
            let median = if k % 2 == 1 {
                as_ms(lat[k / 2])
            } else {
                (as_ms(lat[k / 2 - 1]) + as_ms(lat[k / 2])) / 2.0
            };
            // Nearest rank.
            let rank = ((0.99 * k as f64).ceil() as usize).clamp(1, k);
            (Some(mean), Some(median), Some(as_ms(lat[rank - 1])))
        };
        let (proto, total) = if k == 0 {
            (None, None)
        } else {
            let p: u64 = window
                .iter()
                .map(|c| self.slot_msgs.get(&c.slot).copied().unwrap_or(0))
                .sum();
            let c: u64 = window
                .iter()
                .map(|c| self.request_msgs.get(&c.id).copied().unwrap_or(0))
                .sum();
            (Some(p as f64 / k as f64), Some((p + c) as f64 / k as f64))
        };
        let secs = (to - from) as f64 / 1e6;
        let metrics = RunMetrics {
            committed_slots: self.chosen.len() as u64,
            commits_in_window: k as u64,
            throughput: k as f64 / secs,
            mean_latency_ms: mean,
            median_latency_ms: median,
            p99_latency_ms: p99,
            protocol_msgs_per_commit: proto,
            msgs_per_commit: total,
            phase1_messages: self.phase1,
            messages_by_type: self.by_type,
            dropped_messages: self.dropped,
            per_replica_load: self.load,
            elections: self.elections,
        };
        SimOutput {
            metrics,
            commits: self.commits,
            trace: self.trace,
        }
    }
}
