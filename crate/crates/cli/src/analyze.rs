use std::fmt::Write as _;

use anyhow::{anyhow, Result};
use fpaxos::quorum::{FaultToleranceReport, Intersection};
use fpaxos::{Phase, QuorumSystem};
use serde::Serialize;

use crate::args::QuorumArgs;

#[derive(Serialize)]
struct Analysis {
    kind: String,
    n: usize,
    q1: Option<usize>,
    q2: Option<usize>,
    intersection: Intersection,
    tolerance: Option<FaultToleranceReport>,
}

fn analyze(qs: &QuorumSystem) -> Analysis {
    Analysis {
        kind: qs.kind().to_string(),
        n: qs.n(),
        q1: qs.min_quorum_size(Phase::One),
        q2: qs.min_quorum_size(Phase::Two),
        intersection: qs.validate_cross_intersection(),
        tolerance: qs.failure_tolerance().ok(),
    }
}

fn table(a: &Analysis) -> String {
    let opt = |v: Option<usize>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
    let mut out = String::new();
    let mut row = |k: &str, v: String| writeln!(out, "{k:<24}{v}").expect("write to string");
    row("kind", a.kind.clone());
    row("n", a.n.to_string());
    row("q1", opt(a.q1));
    row("q2", opt(a.q2));
    row(
        "intersection",
        match a.intersection {
            Intersection::Holds => "holds".into(),
            Intersection::Violated { q1, q2 } => format!("violated by {q1:?} and {q2:?}"),
            Intersection::Unverifiable { n } => format!("unverified (n = {n} too large)"),
        },
    );
    match &a.tolerance {
        Some(t) => {
            row("guaranteed_f", t.guaranteed_f.to_string());
            row("worst_case_blocking_f", t.worst_case_blocking_f.to_string());
            row("phase2_only_max_f", t.phase2_only_max_f.to_string());
            row("best_case_f", t.best_case_f.to_string());
        }
        None => row("tolerance", "not computed for this size".into()),
    }
    out
}

/// Prints the analysis; the exit status reflects cross-phase intersection.
pub fn run(q: &QuorumArgs, json: bool) -> Result<bool> {
    let qs = q.build()?.ok_or_else(|| {
        anyhow!("describe a quorum system with --kind/--n/--q2/--rows/--cols/--custom")
    })?;
    let a = analyze(&qs);
    if json {
        println!("{}", serde_json::to_string_pretty(&a)?);
    } else {
        print!("{}", table(&a));
    }
    Ok(!matches!(a.intersection, Intersection::Violated { .. }))
}
