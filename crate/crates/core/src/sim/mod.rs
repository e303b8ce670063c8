//! Deterministic discrete-event simulation of a Multi-Paxos cluster.
//!
//! Virtual time is an integer count of microseconds and events at equal
//! times run in insertion order, so a [`SimConfig`] (seed included) fully
//! determines the trace and metrics. Safety is checked after every accept.

mod config;
mod scenario;
mod trace;
mod world;

use thiserror::Error;

use crate::quorum::Phase;

pub use config::{CrashEvent, LatencyModel, PartitionChange, ReplicaEvent, SimConfig, SimStrategy};
pub use scenario::{scripted_scenario, ScenarioName, ScenarioOutcome};
pub use trace::{DropReason, EventKind, Trace, TraceEvent, TraceParseError};
pub use world::{CommitRecord, ElectionRecord, RunMetrics, SimOutput};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("safety violation: {detail}")]
    SafetyViolation {
        detail: String,
        trace: Box<Trace<crate::multi::Message>>,
    },
    #[error("scenario {scenario:?} ended differently: {detail}")]
    OutcomeMismatch {
        scenario: ScenarioName,
        detail: String,
        trace: Box<Trace<crate::synod::Message>>,
    },
    #[error("scenario step failed: {0}")]
    Scenario(String),
}

/// Runs one simulation to completion.
pub fn run(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    world::World::new(cfg.clone()).run()
}

pub const CSV_HEADER: &str = "n,kind,q1,q2,seed,throughput,mean_lat,p99_lat,msgs_per_commit";

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_default()
}

/// One CSV row matching [`CSV_HEADER`].
pub fn csv_row(cfg: &SimConfig, m: &RunMetrics) -> String {
    let qs = &cfg.quorum;
    let size = |p| {
        qs.min_quorum_size(p)
            .map(|s| s.to_string())
            .unwrap_or_default()
    };
    format!(
        "{},{},{},{},{},{:.3},{},{},{}",
        qs.n(),
        qs.kind(),
        size(Phase::One),
        size(Phase::Two),
        cfg.seed,
        m.throughput,
        opt(m.mean_latency_ms),
        opt(m.p99_latency_ms),
        opt(m.msgs_per_commit),
    )
}
