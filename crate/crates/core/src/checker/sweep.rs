use serde::Serialize;

use crate::quorum::{GridMode, QuorumSystem};

use super::{explore, CheckConfig, CheckError};

/// One quorum system checked by [`quorum_safety_sweep`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepEntry {
    pub name: String,
    pub n: usize,
    /// Result of the direct intersection check.
    pub intersects: bool,
    pub violation_found: bool,
    pub states: u64,
    /// False if the state budget ran out before a verdict.
    pub complete: bool,
}

impl SweepEntry {
    /// The explorer and the intersection check give the same verdict.
    pub fn agrees(&self) -> bool {
        self.intersects != self.violation_found && (self.complete || self.violation_found)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn all_agree(&self) -> bool {
        self.entries.iter().all(SweepEntry::agrees)
    }
}

fn catalog(n: usize) -> Vec<(String, QuorumSystem)> {
    let mut out = Vec::new();
    let mut add = |name: String, qs: Result<QuorumSystem, _>| {
        if let Ok(qs) = qs {
            out.push((name, qs));
        }
    };
    add(format!("majority({n})"), QuorumSystem::majority(n, false));
    if n.is_multiple_of(2) {
        add(
            format!("improved-majority({n})"),
            QuorumSystem::majority(n, true),
        );
    }
    for q2 in 1..=n {
        add(format!("simple({n},{q2})"), QuorumSystem::simple(n, q2));
    }
    for rows in 1..=n {
        if !n.is_multiple_of(rows) {
            continue;
        }
        let cols = n / rows;
        add(
            format!("grid-fpaxos({rows}x{cols})"),
            QuorumSystem::grid(rows, cols, GridMode::Fpaxos),
        );
        add(
            format!("grid-paxos({rows}x{cols})"),
            QuorumSystem::grid(rows, cols, GridMode::Paxos),
        );
        if rows > 1 {
            // Rows for both phases: distinct rows never meet.
            if let Ok(g) = QuorumSystem::grid(rows, cols, GridMode::Fpaxos) {
                let r = g.grid_rows();
                add(
                    format!("rows-only({rows}x{cols})"),
                    QuorumSystem::explicit(n, r.clone(), r),
                );
            }
        }
    }
    // Threshold pairs too small to meet.
    for q1 in 1..=n {
        for q2 in 1..=n {
            if q1 + q2 <= n {
                add(
                    format!("thresholds({n},{q1},{q2})"),
                    QuorumSystem::explicit_thresholds(n, q1, q2),
                );
            }
        }
    }
    out
}

/// For every catalog system over `1..=n_max` acceptors, explores with two
/// ballots and two values and records whether a violation was found next
/// to whether the phase-1 and phase-2 quorums intersect.
///
/// Two ballots suffice for the "violation if no intersection" direction:
/// ballot 1 decides on some phase-2 quorum, ballot 2 completes phase 1 on
/// a phase-1 quorum disjoint from it and is free to decide another value.
pub fn quorum_safety_sweep(n_max: usize, max_states: u64) -> Result<SweepReport, CheckError> {
    if n_max > 4 {
        return Err(CheckError::InvalidConfig(format!(
            "sweep supports up to 4 acceptors, got {n_max}"
        )));
    }
    let mut report = SweepReport::default();
    for n in 1..=n_max {
        for (name, qs) in catalog(n) {
            let intersects = qs
                .validate_cross_intersection()
                .verdict()
                .expect("small systems are always verifiable");
            let cfg = CheckConfig {
                max_states,
                symmetry: true,
                stop_at_first: true,
                ..CheckConfig::new(qs, 2, 2)
            };
            let r = explore(&cfg)?;
            report.entries.push(SweepEntry {
                name,
                n,
                intersects,
                violation_found: !r.is_safe(),
                states: r.states,
                complete: r.complete,
            });
        }
    }
    Ok(report)
}
