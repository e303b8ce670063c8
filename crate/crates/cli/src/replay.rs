use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use fpaxos::checker::{replay, Counterexample, Property};

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Counterexample written by `check`.
    pub file: PathBuf,
    /// Write the replayed message sends as a JSON-lines trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

/// Returns false when the replay confirms the recorded violation.
pub fn run(a: &ReplayArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&a.file)
        .with_context(|| format!("reading {}", a.file.display()))?;
    let cx = Counterexample::from_jsonl(&text)
        .with_context(|| format!("parsing {}", a.file.display()))?;
    let r = replay(&cx.config, &cx.actions)?;
    for (step, ballot, value) in &r.decisions {
        println!("step {step:>3}: decided {value:?} at ballot {ballot}");
    }
    if let Some(p) = &a.trace {
        std::fs::write(p, r.trace.to_jsonl())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let confirmed = match cx.property {
        Property::Agreement => r.agreement_violated,
        Property::Theorem2 => r.theorem2_violated,
    };
    if confirmed {
        println!(
            "{} violated after {} actions",
            cx.property,
            cx.actions.len()
        );
    } else {
        println!(
            "replay of {} actions does not violate {}",
            cx.actions.len(),
            cx.property
        );
    }
    Ok(!confirmed)
}
