//! Parameter sweeps over simulation configs.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fpaxos::quorum::Intersection;
use fpaxos::sim::{
    self, csv_row, LatencyModel, RunMetrics, SimConfig, SimError, SimStrategy, CSV_HEADER,
};
use fpaxos::{Phase, QuorumSystem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    #[default]
    Simple,
    Majority,
    ImprovedMajority,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A sweep read from JSON. Quorum systems come from `quorums` when given,
/// otherwise from `kind` crossed with `n` (and `q2` for simple).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub kind: SweepKind,
    pub n: Vec<usize>,
    pub q2: Vec<usize>,
    pub quorums: Vec<QuorumSystem>,
    /// Seeds to run each quorum system with; defaults to the base seed.
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentSpec {
    pub fn quorum_systems(&self) -> Result<Vec<QuorumSystem>> {
        if !self.quorums.is_empty() {
            return Ok(self.quorums.clone());
        }
        if self.n.is_empty() {
            return Ok(vec![self.base.quorum.clone()]);
        }
        let mut out = Vec::new();
        for &n in &self.n {
            match self.kind {
                SweepKind::Majority => out.push(QuorumSystem::majority(n, false)?),
                SweepKind::ImprovedMajority => out.push(QuorumSystem::majority(n, true)?),
                SweepKind::Simple => {
                    if self.q2.is_empty() {
                        bail!("a simple sweep needs q2 sizes");
                    }
                    for &q2 in &self.q2 {
                        out.push(QuorumSystem::simple(n, q2)?);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Every run, in output order. Fails before anything runs if one of the
    /// systems lacks cross-phase intersection.
    pub fn variations(&self) -> Result<Vec<SimConfig>> {
        let systems = self.quorum_systems()?;
        for qs in &systems {
            if let Intersection::Violated { q1, q2 } = qs.validate_cross_intersection() {
                bail!(
                    "{} system on {} acceptors has disjoint quorums {q1:?} and {q2:?}",
                    qs.kind(),
                    qs.n()
                );
            }
        }
        let seeds = if self.seeds.is_empty() {
            vec![self.base.seed]
        } else {
            self.seeds.clone()
        };
        let mut out = Vec::with_capacity(systems.len() * seeds.len());
        for qs in &systems {
            for &seed in &seeds {
                let cfg = SimConfig {
                    quorum: qs.clone(),
                    n_replicas: None,
                    seed,
                    record_trace: false,
                    ..self.base.clone()
                };
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// ExperimentSpec JSON; flags given alongside override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Quorum family to sweep.
    #[arg(long, value_enum)]
    pub kind: Option<SweepKind>,
    /// Acceptor counts, e.g. `8` or `3..=9`.
    #[arg(long, value_parser = args::parse_list_arg)]
    pub n: Option<args::List>,
    /// Phase-2 sizes for simple quorums, e.g. `2..=5`.
    #[arg(long, value_parser = args::parse_list_arg)]
    pub q2: Option<args::List>,
    /// Seeds, e.g. `0..5` or `1,7,9`.
    #[arg(long, value_parser = args::parse_list_arg)]
    pub seeds: Option<args::List>,
    #[arg(long, value_parser = args::parse_latency)]
    pub latency: Option<LatencyModel>,
    #[arg(long, value_parser = args::parse_strategy)]
    pub strategy: Option<SimStrategy>,
    #[arg(long)]
    pub send_to_all: bool,
    /// Simulated run length in ms.
    #[arg(long)]
    pub duration_ms: Option<u64>,
    /// Commits before this time are excluded from metrics.
    #[arg(long)]
    pub warmup_ms: Option<u64>,
    /// Commits in the final stretch of this length are excluded from metrics.
    #[arg(long)]
    pub cooldown_ms: Option<u64>,
    /// Requests the client keeps in flight.
    #[arg(long)]
    pub window: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn build_spec(a: &SweepArgs) -> Result<ExperimentSpec> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentSpec {
            base: SimConfig {
                seed: crate::simulate::default_seed()?,
                ..SimConfig::default()
            },
            ..ExperimentSpec::default()
        },
    };
    let sizes = |v: &args::List| v.0.iter().map(|&x| x as usize).collect::<Vec<_>>();
    if let Some(k) = a.kind {
        spec.kind = k;
    }
    if let Some(n) = &a.n {
        spec.n = sizes(n);
    }
    if let Some(q2) = &a.q2 {
        spec.q2 = sizes(q2);
    }
    if let Some(s) = &a.seeds {
        spec.seeds = s.0.clone();
    }
    let b = &mut spec.base;
    if let Some(l) = &a.latency {
        b.latency = l.clone();
    }
    if let Some(s) = &a.strategy {
        b.strategy = s.clone();
    }
    if a.send_to_all {
        b.send_to_all = true;
    }
    if let Some(d) = a.duration_ms {
        b.duration_ms = d;
    }
    if let Some(w) = a.warmup_ms {
        b.warmup_ms = w;
    }
    if let Some(c) = a.cooldown_ms {
        b.cooldown_ms = c;
    }
    if let Some(w) = a.window {
        b.window = w;
    }
    if let Some(o) = &a.out {
        spec.output = Some(o.clone());
    }
    if let Some(f) = a.format {
        spec.format = f;
    }
    Ok(spec)
}

#[derive(Serialize)]
struct Row<'a> {
    n: usize,
    kind: String,
    q1: Option<usize>,
    q2: Option<usize>,
    seed: u64,
    metrics: &'a RunMetrics,
}

/// Runs every variation; returns false if any run broke safety.
pub fn run(a: &SweepArgs) -> Result<bool> {
    let spec = build_spec(a)?;
    let configs = spec.variations()?;
    let results: Vec<Result<RunMetrics, SimError>> = configs
        .par_iter()
        .map(|cfg| sim::run(cfg).map(|o| o.metrics))
        .collect();

    let mut metrics = Vec::with_capacity(results.len());
    let mut safe = true;
    for (cfg, r) in configs.iter().zip(results) {
        match r {
            Ok(m) => metrics.push(m),
            Err(SimError::SafetyViolation { detail, .. }) => {
                eprintln!(
                    "safety violation in {} n={} seed={}: {detail}",
                    cfg.quorum.kind(),
                    cfg.n(),
                    cfg.seed
                );
                safe = false;
                metrics.push(RunMetrics::default());
            }
            Err(e) => return Err(e.into()),
        }
    }

    let text = match spec.format {
        Format::Csv => {
            let mut s = format!("{CSV_HEADER}\n");
            for (cfg, m) in configs.iter().zip(&metrics) {
                s.push_str(&csv_row(cfg, m));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let rows: Vec<Row> = configs
                .iter()
                .zip(&metrics)
                .map(|(cfg, m)| Row {
                    n: cfg.n(),
                    kind: cfg.quorum.kind().to_string(),
                    q1: cfg.quorum.min_quorum_size(Phase::One),
                    q2: cfg.quorum.min_quorum_size(Phase::Two),
                    seed: cfg.seed,
                    metrics: m,
                })
                .collect();
            serde_json::to_string_pretty(&rows)? + "\n"
        }
    };
    match &spec.output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(safe)
}
