use serde::{Deserialize, Serialize};

use crate::quorum::{AcceptorId, QuorumSystem, TargetStrategy};

use super::SimError;

/// One-way link delay between two replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LatencyModel {
    Fixed {
        ms: f64,
    },
    /// Drawn per message.
    Uniform {
        min_ms: f64,
        max_ms: f64,
    },
    /// Drawn once per link from the seed, then fixed for the run.
    Heterogeneous {
        min_ms: f64,
        max_ms: f64,
    },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Fixed { ms: 10.0 }
    }
}

/// How leaders order acceptors when picking quorum targets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SimStrategy {
    #[default]
    FixedFirst,
    Rotating,
    Seeded {
        seed: u64,
    },
    Preferred {
        order: Vec<AcceptorId>,
    },
    /// Lowest link latency from the leader first.
    Fastest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashEvent {
    pub t_ms: u64,
    pub replica: u32,
    #[serde(default)]
    pub lose_memory: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaEvent {
    pub t_ms: u64,
    pub replica: u32,
}

/// Replaces the partition layout at `t_ms`. Replicas not listed share one
/// extra group; an empty list heals the network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionChange {
    pub t_ms: u64,
    pub groups: Vec<Vec<u32>>,
}

/// A complete simulation run description. Every field except `quorum` has
/// a default; the default quorum is a three-acceptor majority.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Must equal the quorum system's acceptor count when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_replicas: Option<usize>,
    pub quorum: QuorumSystem,
    pub seed: u64,
    pub latency: LatencyModel,
    pub client_latency_ms: f64,
    pub loss: f64,
    pub duplicate: f64,
    pub partitions: Vec<PartitionChange>,
    pub crashes: Vec<CrashEvent>,
    pub restores: Vec<ReplicaEvent>,
    pub elections: Vec<ReplicaEvent>,
    /// Replica told to run phase 1 at time zero.
    pub initial_leader: Option<u32>,
    pub request_bytes: usize,
    pub window: usize,
    pub duration_ms: u64,
    pub warmup_ms: u64,
    pub cooldown_ms: u64,
    pub client_timeout_ms: u64,
    pub client_retry_ms: u64,
    pub strategy: SimStrategy,
    /// Send every phase message to all acceptors.
    pub send_to_all: bool,
    pub prepare_timeout_ms: u64,
    pub proposal_timeout_ms: u64,
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::new(QuorumSystem::majority(3, false).expect("n=3 majority is valid"))
    }
}

impl SimConfig {
    pub fn new(quorum: QuorumSystem) -> Self {
        SimConfig {
            n_replicas: None,
            quorum,
            seed: 0,
            latency: LatencyModel::default(),
            client_latency_ms: 10.0,
            loss: 0.0,
            duplicate: 0.0,
            partitions: Vec::new(),
            crashes: Vec::new(),
            restores: Vec::new(),
            elections: Vec::new(),
            initial_leader: Some(0),
            request_bytes: 64,
            window: 10,
            duration_ms: 120_000,
            warmup_ms: 10_000,
            cooldown_ms: 10_000,
            client_timeout_ms: 1_000,
            client_retry_ms: 20,
            strategy: SimStrategy::FixedFirst,
            send_to_all: false,
            prepare_timeout_ms: 200,
            proposal_timeout_ms: 200,
            record_trace: true,
        }
    }

    pub fn n(&self) -> usize {
        self.quorum.n()
    }

    pub fn from_json(s: &str) -> Result<Self, SimError> {
        let cfg: SimConfig =
            serde_json::from_str(s).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        let n = self.n();
        if let Some(k) = self.n_replicas {
            if k != n {
                return bad(format!("n_replicas {k} disagrees with quorum size {n}"));
            }
        }
        for (name, p) in [("loss", self.loss), ("duplicate", self.duplicate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} probability {p} outside [0, 1]"));
            }
        }
        let ms_ok = |x: f64| x.is_finite() && x >= 0.0;
        match self.latency {
            LatencyModel::Fixed { ms } if !ms_ok(ms) => return bad(format!("latency {ms} ms")),
            LatencyModel::Uniform { min_ms, max_ms }
            | LatencyModel::Heterogeneous { min_ms, max_ms }
                if !(ms_ok(min_ms) && ms_ok(max_ms) && min_ms <= max_ms) =>
            {
                return bad(format!("latency range [{min_ms}, {max_ms}] ms"));
            }
            _ => {}
        }
        if !ms_ok(self.client_latency_ms) {
            return bad(format!("client latency {} ms", self.client_latency_ms));
        }
        if self.request_bytes == 0 {
            return bad("request_bytes must be at least 1".into());
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if self.warmup_ms + self.cooldown_ms >= self.duration_ms {
            return bad("warmup plus cooldown must be shorter than the run".into());
        }
        if self.client_timeout_ms == 0
            || self.prepare_timeout_ms == 0
            || self.proposal_timeout_ms == 0
        {
            return bad("timeouts must be positive".into());
        }
        let in_range = |r: u32| (r as usize) < n;
        if let Some(r) = self.initial_leader {
            if !in_range(r) {
                return bad(format!("initial leader R{r} out of range"));
            }
        }
        let times = [
            (
                "crash",
                self.crashes
                    .iter()
                    .map(|c| (c.t_ms, c.replica))
                    .collect::<Vec<_>>(),
            ),
            (
                "restore",
                self.restores.iter().map(|c| (c.t_ms, c.replica)).collect(),
            ),
            (
                "elect",
                self.elections.iter().map(|c| (c.t_ms, c.replica)).collect(),
            ),
        ];
        for (name, evs) in times {
            if evs.windows(2).any(|w| w[0].0 > w[1].0) {
                return bad(format!("{name} schedule is not time-ordered"));
            }
            if let Some((_, r)) = evs.iter().find(|(_, r)| !in_range(*r)) {
                return bad(format!("{name} names R{r}, outside {n} replicas"));
            }
        }
        if self.partitions.windows(2).any(|w| w[0].t_ms > w[1].t_ms) {
            return bad("partition schedule is not time-ordered".into());
        }
        for p in &self.partitions {
            let mut seen = vec![false; n];
            for &r in p.groups.iter().flatten() {
                if !in_range(r) || seen[r as usize] {
                    return bad(format!("partition lists R{r} twice or out of range"));
                }
                seen[r as usize] = true;
            }
        }
        if let SimStrategy::Preferred { order } = &self.strategy {
            if let Some(a) = order.iter().find(|a| a.index() >= n) {
                return bad(format!("preferred order names A{}", a.0));
            }
        }
        Ok(())
    }

    /// The target strategy for replica `me`, given the link latency table.
    pub(crate) fn strategy_for(&self, me: usize, link_us: &[Vec<u64>]) -> TargetStrategy {
        match &self.strategy {
            SimStrategy::FixedFirst => TargetStrategy::FixedFirst,
            SimStrategy::Rotating => TargetStrategy::Rotating,
            SimStrategy::Seeded { seed } => TargetStrategy::Seeded {
                seed: seed.wrapping_add(me as u64),
            },
            SimStrategy::Preferred { order } => TargetStrategy::Preferred {
                order: order.clone(),
            },
            SimStrategy::Fastest => {
                let mut order: Vec<usize> = (0..self.n()).collect();
                order.sort_by_key(|&a| (if a == me { 0 } else { link_us[me][a] + 1 }, a));
                TargetStrategy::Preferred {
                    order: order.into_iter().map(|a| AcceptorId(a as u32)).collect(),
                }
            }
        }
    }
}
