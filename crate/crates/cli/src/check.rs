use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fpaxos::checker::{explore, quorum_safety_sweep, CheckConfig, Counterexample, Property};
use fpaxos::QuorumSystem;

use crate::args::QuorumArgs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PropertyArg {
    Agreement,
    Theorem2,
}

impl From<PropertyArg> for Property {
    fn from(p: PropertyArg) -> Self {
        match p {
            PropertyArg::Agreement => Property::Agreement,
            PropertyArg::Theorem2 => Property::Theorem2,
        }
    }
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// CheckConfig JSON; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub quorum: QuorumArgs,
    /// Ballot rounds to explore (1-4).
    #[arg(long)]
    pub ballots: Option<u8>,
    /// Distinct proposable values (1-4).
    #[arg(long)]
    pub values: Option<u8>,
    /// Proposers owning the ballots round-robin.
    #[arg(long)]
    pub proposers: Option<u8>,
    /// Give up after this many distinct states.
    #[arg(long)]
    pub max_states: Option<u64>,
    /// Merge states equal up to acceptor and value relabeling.
    #[arg(long)]
    pub symmetry: bool,
    /// Allow this many acceptor state losses.
    #[arg(long)]
    pub amnesia: Option<u8>,
    /// Properties to check (repeatable; default both).
    #[arg(long = "property", value_enum)]
    pub properties: Vec<PropertyArg>,
    /// Stop at the first violation of any property.
    #[arg(long)]
    pub stop_at_first: bool,
    /// Where to write the counterexample if one is found.
    #[arg(long, default_value = "counterexample.jsonl")]
    pub counterexample: PathBuf,
    /// Print the result as JSON.
    #[arg(long)]
    pub json: bool,
    /// Instead of one system, sweep the built-in catalog up to this many
    /// acceptors and compare against the intersection check.
    #[arg(long, value_name = "N_MAX", conflicts_with_all = ["config", "ballots", "values", "amnesia"])]
    pub sweep: Option<usize>,
}

fn build_config(a: &CheckArgs) -> Result<CheckConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut cfg = CheckConfig::from_json(&text)?;
            if let Some(qs) = a.quorum.build()? {
                cfg.quorum = qs;
            }
            cfg
        }
        None => {
            let qs = a
                .quorum
                .build()?
                .unwrap_or(QuorumSystem::majority(3, false)?);
            CheckConfig::new(qs, 2, 2)
        }
    };
    if let Some(b) = a.ballots {
        cfg.ballots = b;
    }
    if let Some(v) = a.values {
        cfg.values = v;
    }
    if let Some(p) = a.proposers {
        cfg.proposers = p;
    }
    if let Some(m) = a.max_states {
        cfg.max_states = m;
    }
    if a.symmetry {
        cfg.symmetry = true;
    }
    if let Some(k) = a.amnesia {
        cfg.amnesia = k;
    }
    if !a.properties.is_empty() {
        cfg.properties = a.properties.iter().map(|&p| p.into()).collect();
    }
    if a.stop_at_first {
        cfg.stop_at_first = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Returns false when a violation was found.
pub fn run(a: &CheckArgs) -> Result<bool> {
    if let Some(n_max) = a.sweep {
        return sweep(n_max, a.max_states.unwrap_or(2_000_000), a.json);
    }
    let cfg = build_config(a)?;
    let r = explore(&cfg)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        println!(
            "{} states, {} transitions, depth {}{}",
            r.states,
            r.transitions,
            r.depth,
            match (r.complete, r.is_safe()) {
                (true, _) => "",
                (false, true) => " (state budget reached, search incomplete)",
                (false, false) => " (stopped once every property had a counterexample)",
            }
        );
    }
    let Some(first) = r.violations.first() else {
        if !a.json {
            println!("no violation of {}", names(&cfg.properties));
        }
        return Ok(true);
    };
    let cx = Counterexample::new(&cfg, first);
    std::fs::write(&a.counterexample, cx.to_jsonl())
        .with_context(|| format!("writing {}", a.counterexample.display()))?;
    if !a.json {
        for v in &r.violations {
            println!("violation of {} in {} actions", v.property, v.actions.len());
        }
        println!(
            "counterexample for {} written to {}",
            first.property,
            a.counterexample.display()
        );
    }
    Ok(false)
}

fn names(ps: &[Property]) -> String {
    ps.iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn sweep(n_max: usize, max_states: u64, json: bool) -> Result<bool> {
    let report = quorum_safety_sweep(n_max, max_states)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{:<28}{:>3} {:>11} {:>10} {:>9} {:>7}",
            "system", "n", "intersects", "violation", "states", "agrees"
        );
        for e in &report.entries {
            println!(
                "{:<28}{:>3} {:>11} {:>10} {:>9} {:>7}",
                e.name,
                e.n,
                e.intersects,
                e.violation_found,
                e.states,
                e.agrees()
            );
        }
    }
    if !report.all_agree() {
        bail!("checker and intersection test disagree on some system");
    }
    Ok(true)
}
