use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use fpaxos::sim::{self, scripted_scenario, ScenarioName, SimConfig, SimError, SimOutput};
use fpaxos::QuorumSystem;

use crate::args::{self, QuorumArgs};

#[derive(Args, Debug, Clone, Default)]
pub struct SimFlags {
    #[command(flatten)]
    pub quorum: QuorumArgs,
    /// RNG seed [default: $FPAXOS_SEED, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// fixed:MS, uniform:MIN:MAX or heterogeneous:MIN:MAX.
    #[arg(long, value_parser = args::parse_latency)]
    pub latency: Option<fpaxos::sim::LatencyModel>,
    /// One-way client to replica latency in ms.
    #[arg(long)]
    pub client_latency_ms: Option<f64>,
    /// Per-message loss probability on replica links.
    #[arg(long)]
    pub loss: Option<f64>,
    /// Per-message duplication probability on replica links.
    #[arg(long)]
    pub duplicate: Option<f64>,
    /// fixed-first, rotating, seeded:SEED, fastest or preferred:0+1+2.
    #[arg(long, value_parser = args::parse_strategy)]
    pub strategy: Option<fpaxos::sim::SimStrategy>,
    /// Send phase messages to every acceptor.
    #[arg(long)]
    pub send_to_all: bool,
    /// Requests the client keeps in flight.
    #[arg(long)]
    pub window: Option<usize>,
    /// Request payload size in bytes.
    #[arg(long)]
    pub request_bytes: Option<usize>,
    /// Simulated run length in ms.
    #[arg(long)]
    pub duration_ms: Option<u64>,
    /// Commits before this time are excluded from metrics.
    #[arg(long)]
    pub warmup_ms: Option<u64>,
    /// Commits in the final stretch of this length are excluded from metrics.
    #[arg(long)]
    pub cooldown_ms: Option<u64>,
    /// Client resend timeout in ms.
    #[arg(long)]
    pub client_timeout_ms: Option<u64>,
    /// Delay before the client resends to another replica.
    #[arg(long)]
    pub client_retry_ms: Option<u64>,
    /// Phase 1 timeout in ms.
    #[arg(long)]
    pub prepare_timeout_ms: Option<u64>,
    /// Phase 2 timeout in ms.
    #[arg(long)]
    pub proposal_timeout_ms: Option<u64>,
}

impl SimFlags {
    /// Applies every flag that was given on top of `cfg`.
    pub fn apply(&self, cfg: &mut SimConfig) -> Result<()> {
        if let Some(qs) = self.quorum.build()? {
            cfg.quorum = qs;
            cfg.n_replicas = None;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(l) = &self.latency {
            cfg.latency = l.clone();
        }
        if let Some(c) = self.client_latency_ms {
            cfg.client_latency_ms = c;
        }
        if let Some(p) = self.loss {
            cfg.loss = p;
        }
        if let Some(p) = self.duplicate {
            cfg.duplicate = p;
        }
        if let Some(s) = &self.strategy {
            cfg.strategy = s.clone();
        }
        if self.send_to_all {
            cfg.send_to_all = true;
        }
        if let Some(w) = self.window {
            cfg.window = w;
        }
        if let Some(b) = self.request_bytes {
            cfg.request_bytes = b;
        }
        if let Some(d) = self.duration_ms {
            cfg.duration_ms = d;
        }
        if let Some(w) = self.warmup_ms {
            cfg.warmup_ms = w;
        }
        if let Some(c) = self.cooldown_ms {
            cfg.cooldown_ms = c;
        }
        if let Some(t) = self.client_timeout_ms {
            cfg.client_timeout_ms = t;
        }
        if let Some(t) = self.client_retry_ms {
            cfg.client_retry_ms = t;
        }
        if let Some(t) = self.prepare_timeout_ms {
            cfg.prepare_timeout_ms = t;
        }
        if let Some(t) = self.proposal_timeout_ms {
            cfg.proposal_timeout_ms = t;
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Run a scripted two-proposer scenario instead of a cluster.
    #[arg(long, value_parser = ["fig2a", "fig2b"])]
    pub scenario: Option<String>,
    /// SimConfig JSON; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: SimFlags,
    /// Crash a replica: t=MS,r=REPLICA[,lose] (repeatable).
    #[arg(long = "crash", value_parser = args::parse_crash)]
    pub crashes: Vec<fpaxos::sim::CrashEvent>,
    /// Restore a crashed replica: t=MS,r=REPLICA (repeatable).
    #[arg(long = "restore", value_parser = args::parse_replica_event)]
    pub restores: Vec<fpaxos::sim::ReplicaEvent>,
    /// Make a replica run phase 1: t=MS,r=REPLICA (repeatable).
    #[arg(long = "elect", value_parser = args::parse_replica_event)]
    pub elections: Vec<fpaxos::sim::ReplicaEvent>,
    /// Change partitions: t=MS,groups=0+1|2 or t=MS,heal (repeatable).
    #[arg(long = "partition", value_parser = args::parse_partition)]
    pub partitions: Vec<fpaxos::sim::PartitionChange>,
    /// Replica that runs phase 1 at time zero.
    #[arg(long, conflicts_with = "no_leader")]
    pub leader: Option<u32>,
    /// Start without a leader.
    #[arg(long)]
    pub no_leader: bool,
    /// Write the event trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write run metrics as JSON.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Write every client commit as CSV (t_us,latency_us,id,slot).
    #[arg(long)]
    pub commits: Option<PathBuf>,
    /// Print metrics JSON instead of the summary.
    #[arg(long)]
    pub json: bool,
}

pub fn default_seed() -> Result<u64> {
    match std::env::var("FPAXOS_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .with_context(|| format!("FPAXOS_SEED=`{s}` is not a number")),
        Err(_) => Ok(0),
    }
}

fn build_config(a: &SimulateArgs) -> Result<SimConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut cfg = SimConfig::from_json(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            if !text_has_key(&text, "seed") {
                cfg.seed = default_seed()?;
            }
            cfg
        }
        None => SimConfig {
            seed: default_seed()?,
            ..SimConfig::default()
        },
    };
    a.flags.apply(&mut cfg)?;
    if !a.crashes.is_empty() {
        cfg.crashes = a.crashes.clone();
    }
    if !a.restores.is_empty() {
        cfg.restores = a.restores.clone();
    }
    if !a.elections.is_empty() {
        cfg.elections = a.elections.clone();
    }
    if !a.partitions.is_empty() {
        cfg.partitions = a.partitions.clone();
    }
    if let Some(l) = a.leader {
        cfg.initial_leader = Some(l);
    }
    if a.no_leader {
        cfg.initial_leader = None;
    }
    // Recording costs memory on long runs; only keep what will be written.
    cfg.record_trace = a.trace.is_some();
    cfg.validate()?;
    Ok(cfg)
}

fn text_has_key(json: &str, key: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(json)
        .ok()
        .and_then(|v| v.as_object().map(|o| o.contains_key(key)))
        .unwrap_or(false)
}

fn write(path: &Path, data: &str) -> Result<()> {
    std::fs::write(path, data).with_context(|| format!("writing {}", path.display()))
}

pub fn summary(out: &SimOutput) -> String {
    let m = &out.metrics;
    let f = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let mut s = String::new();
    let mut row = |k: &str, v: String| writeln!(s, "{k:<26}{v}").expect("write to string");
    row("committed_slots", m.committed_slots.to_string());
    row("commits_in_window", m.commits_in_window.to_string());
    row("throughput_per_s", format!("{:.3}", m.throughput));
    row("mean_latency_ms", f(m.mean_latency_ms));
    row("median_latency_ms", f(m.median_latency_ms));
    row("p99_latency_ms", f(m.p99_latency_ms));
    row("protocol_msgs_per_commit", f(m.protocol_msgs_per_commit));
    row("msgs_per_commit", f(m.msgs_per_commit));
    row("phase1_messages", m.phase1_messages.to_string());
    row("dropped_messages", m.dropped_messages.to_string());
    let elections: Vec<String> = m
        .elections
        .iter()
        .map(|e| format!("R{}@{:.3}ms", e.replica, e.t_us as f64 / 1000.0))
        .collect();
    row("elections", elections.join(" "));
    s
}

fn run_scenario(name: &str, a: &SimulateArgs) -> Result<bool> {
    let name: ScenarioName = name.parse()?;
    let qs = a
        .flags
        .quorum
        .build()?
        .unwrap_or(QuorumSystem::simple(4, 2)?);
    let (trace, ok) = match scripted_scenario(name, &qs) {
        Ok(out) => {
            let decided: Vec<String> = out
                .proposer_decisions
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    format!(
                        "P{i}={}",
                        d.as_ref().map_or("-".to_string(), |v| format!("{v:?}"))
                    )
                })
                .collect();
            println!("proposers decided: {}", decided.join(" "));
            match &out.learned {
                Some((b, v)) => println!("learned {v:?} at ballot {b}"),
                None => println!("nothing learned"),
            }
            (out.trace, true)
        }
        Err(SimError::OutcomeMismatch { detail, trace, .. }) => {
            eprintln!("scenario outcome differs: {detail}");
            (*trace, false)
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(p) = &a.trace {
        write(p, &trace.to_jsonl())?;
    }
    Ok(ok)
}

/// Returns false when the run hit a safety violation.
pub fn run(a: &SimulateArgs) -> Result<bool> {
    if let Some(name) = &a.scenario {
        return run_scenario(name, a);
    }
    let cfg = build_config(a)?;
    match sim::run(&cfg) {
        Ok(out) => {
            if let Some(p) = &a.trace {
                write(p, &out.trace.to_jsonl())?;
            }
            if let Some(p) = &a.metrics {
                write(p, &(serde_json::to_string_pretty(&out.metrics)? + "\n"))?;
            }
            if let Some(p) = &a.commits {
                let mut csv = String::from("t_us,latency_us,id,slot\n");
                for c in &out.commits {
                    writeln!(csv, "{},{},{},{}", c.t_us, c.latency_us, c.id, c.slot)?;
                }
                write(p, &csv)?;
            }
            if a.json {
                println!("{}", serde_json::to_string_pretty(&out.metrics)?);
            } else {
                print!("{}", summary(&out));
            }
            Ok(true)
        }
        Err(SimError::SafetyViolation { detail, trace }) => {
            eprintln!("safety violation: {detail}");
            if let Some(p) = &a.trace {
                write(p, &trace.to_jsonl())?;
            }
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}
