//! Quorum systems for the two protocol phases.
//!
//! A [`QuorumSystem`] decides which sets of acceptors may act as a phase-1
//! quorum (prepare/promise) and which may act as a phase-2 quorum
//! (propose/accept). Safety only needs every phase-1 quorum to meet every
//! phase-2 quorum; quorums of the same phase may be disjoint.
//!
//! Three families ship: threshold systems (classic majority, majority with
//! the even-size phase-2 reduction, and simple `|Q1| + |Q2| > N` systems),
//! grids (row-and-column Paxos grids and row/column split grids), and
//! hand-built explicit families used for testing and falsification.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest universe an [`AcceptorSet`] can hold.
pub const MAX_ACCEPTORS: usize = 64;

/// Largest universe checked by enumerating every subset.
pub const POWERSET_LIMIT: usize = 12;

/// Largest universe checked by enumerating minimal quorums or failure sets.
pub const EXHAUSTIVE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuorumError {
    #[error("invalid quorum parameter: {0}")]
    InvalidParameter(String),
    #[error("acceptor {id} is outside the universe of {n} acceptors")]
    OutsideUniverse { id: u32, n: usize },
    #[error("unverifiable at this size: n = {n} exceeds the exhaustive limit of {limit}")]
    Unverifiable { n: usize, limit: usize },
}

/// Index of an acceptor in `[0, n)`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct AcceptorId(pub u32);

impl AcceptorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AcceptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

/// A finite set of acceptors, stored as a bitmask.
///
/// Serializes as a sorted JSON array of acceptor indices.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AcceptorSet(u64);

impl AcceptorSet {
    pub const fn empty() -> Self {
        AcceptorSet(0)
    }

    /// Every acceptor in a universe of `n`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_ACCEPTORS);
        if n >= 64 {
            AcceptorSet(u64::MAX)
        } else {
            AcceptorSet((1u64 << n) - 1)
        }
    }

    pub const fn from_bits(bits: u64) -> Self {
        AcceptorSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(id: AcceptorId) -> Self {
        AcceptorSet(1u64 << id.0)
    }

    pub fn insert(&mut self, id: AcceptorId) {
        self.0 |= 1u64 << id.0;
    }

    pub fn remove(&mut self, id: AcceptorId) {
        self.0 &= !(1u64 << id.0);
    }

    pub fn contains(self, id: AcceptorId) -> bool {
        id.0 < 64 && self.0 & (1u64 << id.0) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: AcceptorSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: AcceptorSet) -> AcceptorSet {
        AcceptorSet(self.0 | other.0)
    }

    pub fn intersection(self, other: AcceptorSet) -> AcceptorSet {
        AcceptorSet(self.0 & other.0)
    }

    pub fn difference(self, other: AcceptorSet) -> AcceptorSet {
        AcceptorSet(self.0 & !other.0)
    }

    pub fn intersects(self, other: AcceptorSet) -> bool {
        self.0 & other.0 != 0
    }

    /// Members in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = AcceptorId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros();
            bits &= bits - 1;
            Some(AcceptorId(i))
        })
    }

    /// Highest member index plus one, or 0 for the empty set.
    fn span(self) -> usize {
        64 - self.0.leading_zeros() as usize
    }
}

impl FromIterator<AcceptorId> for AcceptorSet {
    fn from_iter<I: IntoIterator<Item = AcceptorId>>(iter: I) -> Self {
        let mut s = AcceptorSet::empty();
        for id in iter {
            s.insert(id);
        }
        s
    }
}

impl fmt::Debug for AcceptorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|a| a.0)).finish()
    }
}

impl Serialize for AcceptorSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(|a| a.0))
    }
}

impl<'de> Deserialize<'de> for AcceptorSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<u32>::deserialize(deserializer)?;
        let mut s = AcceptorSet::empty();
        for id in ids {
            if id as usize >= MAX_ACCEPTORS {
                return Err(serde::de::Error::custom(format!(
                    "acceptor index {id} exceeds the supported maximum of {}",
                    MAX_ACCEPTORS - 1
                )));
            }
            s.insert(AcceptorId(id));
        }
        Ok(s)
    }
}

/// Which protocol phase a quorum serves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Prepare / promise.
    One,
    /// Propose / accept.
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuorumKind {
    Majority,
    EvenImprovedMajority,
    Simple,
    GridPaxos,
    GridFpaxos,
    Explicit,
}

impl QuorumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuorumKind::Majority => "majority",
            QuorumKind::EvenImprovedMajority => "even-improved-majority",
            QuorumKind::Simple => "simple",
            QuorumKind::GridPaxos => "grid-paxos",
            QuorumKind::GridFpaxos => "grid-fpaxos",
            QuorumKind::Explicit => "explicit",
        }
    }
}

impl fmt::Display for QuorumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Every quorum is one full row plus one full column.
    Paxos,
    /// Phase 1 takes a full row, phase 2 a full column.
    Fpaxos,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Rule {
    Threshold {
        q1: usize,
        q2: usize,
    },
    Grid {
        rows: usize,
        cols: usize,
        mode: GridMode,
    },
    Explicit {
        q1: Vec<AcceptorSet>,
        q2: Vec<AcceptorSet>,
    },
}

/// The families of valid phase-1 and phase-2 quorums over `n` acceptors.
///
/// Both predicates are upward closed: any superset of a quorum is a quorum.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "QuorumSpec", into = "QuorumSpec")]
pub struct QuorumSystem {
    kind: QuorumKind,
    n: usize,
    rule: Rule,
}

/// JSON form: `{kind, n, q2_size?, rows?, cols?, q1?, q2?}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuorumSpec {
    pub kind: QuorumKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<Vec<AcceptorSet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<Vec<AcceptorSet>>,
}

impl TryFrom<QuorumSpec> for QuorumSystem {
    type Error = QuorumError;

    fn try_from(spec: QuorumSpec) -> Result<Self, Self::Error> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| {
                QuorumError::InvalidParameter(format!(
                    "{} quorum system requires `{name}`",
                    spec.kind
                ))
            })
        };
        let qs = match spec.kind {
            QuorumKind::Majority => QuorumSystem::majority(need(spec.n, "n")?, false)?,
            QuorumKind::EvenImprovedMajority => QuorumSystem::majority(need(spec.n, "n")?, true)?,
            QuorumKind::Simple => {
                QuorumSystem::simple(need(spec.n, "n")?, need(spec.q2_size, "q2_size")?)?
            }
            QuorumKind::GridPaxos | QuorumKind::GridFpaxos => {
                let mode = if spec.kind == QuorumKind::GridPaxos {
                    GridMode::Paxos
                } else {
                    GridMode::Fpaxos
                };
                let qs =
                    QuorumSystem::grid(need(spec.rows, "rows")?, need(spec.cols, "cols")?, mode)?;
                if let Some(n) = spec.n {
                    if n != qs.n {
                        return Err(QuorumError::InvalidParameter(format!(
                            "grid of {} rows x {} cols has {} acceptors, not {n}",
                            qs.rows().unwrap_or(0),
                            qs.cols().unwrap_or(0),
                            qs.n
                        )));
                    }
                }
                qs
            }
            QuorumKind::Explicit => QuorumSystem::explicit(
                need(spec.n, "n")?,
                spec.q1.clone().unwrap_or_default(),
                spec.q2.clone().unwrap_or_default(),
            )?,
        };
        Ok(qs)
    }
}

impl From<QuorumSystem> for QuorumSpec {
    fn from(qs: QuorumSystem) -> Self {
        let mut spec = QuorumSpec {
            kind: qs.kind,
            n: Some(qs.n),
            q2_size: None,
            rows: None,
            cols: None,
            q1: None,
            q2: None,
        };
        match qs.rule {
            Rule::Threshold { q2, .. } => {
                if qs.kind == QuorumKind::Simple {
                    spec.q2_size = Some(q2);
                }
            }
            Rule::Grid { rows, cols, .. } => {
                spec.rows = Some(rows);
                spec.cols = Some(cols);
            }
            Rule::Explicit { q1, q2 } => {
                spec.q1 = Some(q1);
                spec.q2 = Some(q2);
            }
        }
        spec
    }
}

fn check_n(n: usize) -> Result<(), QuorumError> {
    if n == 0 {
        return Err(QuorumError::InvalidParameter("n must be at least 1".into()));
    }
    if n > MAX_ACCEPTORS {
        return Err(QuorumError::InvalidParameter(format!(
            "n = {n} exceeds the supported maximum of {MAX_ACCEPTORS}"
        )));
    }
    Ok(())
}

impl QuorumSystem {
    /// Majority quorums. With `improved`, phase 2 shrinks to `ceil(n/2)`;
    /// for odd `n` that is the classic majority again.
    pub fn majority(n: usize, improved: bool) -> Result<Self, QuorumError> {
        check_n(n)?;
        let q1 = n / 2 + 1;
        let q2 = if improved { n.div_ceil(2) } else { q1 };
        Ok(QuorumSystem {
            kind: if improved {
                QuorumKind::EvenImprovedMajority
            } else {
                QuorumKind::Majority
            },
            n,
            rule: Rule::Threshold { q1, q2 },
        })
    }

    /// Simple quorums: any `q2_size` acceptors form a phase-2 quorum and any
    /// `n - q2_size + 1` form a phase-1 quorum.
    pub fn simple(n: usize, q2_size: usize) -> Result<Self, QuorumError> {
        check_n(n)?;
        if q2_size == 0 || q2_size > n {
            return Err(QuorumError::InvalidParameter(format!(
                "q2_size must be in [1, {n}], got {q2_size}"
            )));
        }
        Ok(QuorumSystem {
            kind: QuorumKind::Simple,
            n,
            rule: Rule::Threshold {
                q1: n - q2_size + 1,
                q2: q2_size,
            },
        })
    }

    /// Grid quorums over `rows x cols` acceptors. Acceptor `i` sits at
    /// row `i / cols`, column `i % cols`.
    pub fn grid(rows: usize, cols: usize, mode: GridMode) -> Result<Self, QuorumError> {
        if rows == 0 || cols == 0 {
            return Err(QuorumError::InvalidParameter(format!(
                "grid dimensions must be positive, got {rows} x {cols}"
            )));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| QuorumError::InvalidParameter("grid too large".into()))?;
        check_n(n)?;
        Ok(QuorumSystem {
            kind: match mode {
                GridMode::Paxos => QuorumKind::GridPaxos,
                GridMode::Fpaxos => QuorumKind::GridFpaxos,
            },
            n,
            rule: Rule::Grid { rows, cols, mode },
        })
    }

    /// A hand-built system: the quorums of each phase are the supersets of
    /// the listed sets. Each family needs at least one set and no set may
    /// be empty.
    pub fn explicit(
        n: usize,
        q1: Vec<AcceptorSet>,
        q2: Vec<AcceptorSet>,
    ) -> Result<Self, QuorumError> {
        check_n(n)?;
        for (name, family) in [("q1", &q1), ("q2", &q2)] {
            if family.is_empty() {
                return Err(QuorumError::InvalidParameter(format!(
                    "{name} lists no quorums"
                )));
            }
            if family.iter().any(|s| s.is_empty()) {
                return Err(QuorumError::InvalidParameter(format!(
                    "{name} contains the empty set"
                )));
            }
        }
        let universe = AcceptorSet::full(n);
        for s in q1.iter().chain(q2.iter()) {
            if !s.is_subset(universe) {
                let id = s.difference(universe).iter().next().map_or(0, |a| a.0);
                return Err(QuorumError::OutsideUniverse { id, n });
            }
        }
        let mut q1 = q1;
        let mut q2 = q2;
        q1.sort();
        q1.dedup();
        q2.sort();
        q2.dedup();
        Ok(QuorumSystem {
            kind: QuorumKind::Explicit,
            n,
            rule: Rule::Explicit { q1, q2 },
        })
    }

    /// Explicit system whose phase-1 quorums are all sets of at least `q1`
    /// acceptors and phase-2 quorums all sets of at least `q2`. Unlike
    /// [`QuorumSystem::simple`] the sizes are unconstrained, so this can
    /// build systems without cross-phase intersection.
    pub fn explicit_thresholds(n: usize, q1: usize, q2: usize) -> Result<Self, QuorumError> {
        check_n(n)?;
        if q1 > n || q2 > n {
            return Err(QuorumError::InvalidParameter(format!(
                "threshold sizes ({q1}, {q2}) exceed n = {n}"
            )));
        }
        QuorumSystem::explicit(n, k_subsets(n, q1), k_subsets(n, q2))
    }

    pub fn kind(&self) -> QuorumKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn universe(&self) -> AcceptorSet {
        AcceptorSet::full(self.n)
    }

    pub fn acceptors(&self) -> impl Iterator<Item = AcceptorId> {
        (0..self.n as u32).map(AcceptorId)
    }

    pub fn rows(&self) -> Option<usize> {
        match self.rule {
            Rule::Grid { rows, .. } => Some(rows),
            _ => None,
        }
    }

    pub fn cols(&self) -> Option<usize> {
        match self.rule {
            Rule::Grid { cols, .. } => Some(cols),
            _ => None,
        }
    }

    /// The phase-2 size parameter of a simple system.
    pub fn q2_size(&self) -> Option<usize> {
        match (self.kind, &self.rule) {
            (QuorumKind::Simple, Rule::Threshold { q2, .. }) => Some(*q2),
            _ => None,
        }
    }

    fn row_mask(&self, cols: usize, r: usize) -> u64 {
        let row = if cols >= 64 {
            u64::MAX
        } else {
            (1u64 << cols) - 1
        };
        row << (r * cols)
    }

    fn col_mask(&self, rows: usize, cols: usize, c: usize) -> u64 {
        (0..rows).fold(0u64, |m, r| m | (1u64 << (r * cols + c)))
    }

    /// Full rows of a grid system, top to bottom.
    pub fn grid_rows(&self) -> Vec<AcceptorSet> {
        match self.rule {
            Rule::Grid { rows, cols, .. } => (0..rows)
                .map(|r| AcceptorSet(self.row_mask(cols, r)))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Full columns of a grid system, left to right.
    pub fn grid_cols(&self) -> Vec<AcceptorSet> {
        match self.rule {
            Rule::Grid { rows, cols, .. } => (0..cols)
                .map(|c| AcceptorSet(self.col_mask(rows, cols, c)))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Quorum test without universe validation; members outside the
    /// universe are ignored.
    pub fn contains_quorum(&self, phase: Phase, s: AcceptorSet) -> bool {
        let s = s.intersection(self.universe());
        match &self.rule {
            Rule::Threshold { q1, q2 } => {
                let need = match phase {
                    Phase::One => *q1,
                    Phase::Two => *q2,
                };
                s.len() >= need
            }
            Rule::Grid { rows, cols, mode } => {
                let has_row = (0..*rows).any(|r| {
                    let m = self.row_mask(*cols, r);
                    s.0 & m == m
                });
                let has_col = || {
                    (0..*cols).any(|c| {
                        let m = self.col_mask(*rows, *cols, c);
                        s.0 & m == m
                    })
                };
                match (mode, phase) {
                    (GridMode::Fpaxos, Phase::One) => has_row,
                    (GridMode::Fpaxos, Phase::Two) => has_col(),
                    (GridMode::Paxos, _) => has_row && has_col(),
                }
            }
            Rule::Explicit { q1, q2 } => {
                let family = match phase {
                    Phase::One => q1,
                    Phase::Two => q2,
                };
                family.iter().any(|q| q.is_subset(s))
            }
        }
    }

    fn check_members(&self, s: AcceptorSet) -> Result<(), QuorumError> {
        if s.span() > self.n {
            let id = s
                .difference(self.universe())
                .iter()
                .next()
                .map_or(0, |a| a.0);
            return Err(QuorumError::OutsideUniverse { id, n: self.n });
        }
        Ok(())
    }

    pub fn is_quorum(&self, phase: Phase, s: AcceptorSet) -> Result<bool, QuorumError> {
        self.check_members(s)?;
        Ok(self.contains_quorum(phase, s))
    }

    pub fn is_q1(&self, s: AcceptorSet) -> Result<bool, QuorumError> {
        self.is_quorum(Phase::One, s)
    }

    pub fn is_q2(&self, s: AcceptorSet) -> Result<bool, QuorumError> {
        self.is_quorum(Phase::Two, s)
    }

    /// Size of the smallest quorum of `phase`, or `None` if the phase has
    /// no quorums at all.
    pub fn min_quorum_size(&self, phase: Phase) -> Option<usize> {
        match &self.rule {
            Rule::Threshold { q1, q2 } => Some(match phase {
                Phase::One => *q1,
                Phase::Two => *q2,
            }),
            Rule::Grid { rows, cols, mode } => Some(match (mode, phase) {
                (GridMode::Fpaxos, Phase::One) => *cols,
                (GridMode::Fpaxos, Phase::Two) => *rows,
                (GridMode::Paxos, _) => rows + cols - 1,
            }),
            Rule::Explicit { q1, q2 } => {
                let family = match phase {
                    Phase::One => q1,
                    Phase::Two => q2,
                };
                family.iter().map(|s| s.len()).min()
            }
        }
    }

    /// Every inclusion-minimal quorum of `phase`.
    pub fn minimal_quorums(&self, phase: Phase) -> Result<Vec<AcceptorSet>, QuorumError> {
        match &self.rule {
            Rule::Threshold { q1, q2 } => {
                if self.n > EXHAUSTIVE_LIMIT {
                    return Err(QuorumError::Unverifiable {
                        n: self.n,
                        limit: EXHAUSTIVE_LIMIT,
                    });
                }
                let k = match phase {
                    Phase::One => *q1,
                    Phase::Two => *q2,
                };
                Ok(k_subsets(self.n, k))
            }
            Rule::Grid { rows, cols, mode } => Ok(match (mode, phase) {
                (GridMode::Fpaxos, Phase::One) => self.grid_rows(),
                (GridMode::Fpaxos, Phase::Two) => self.grid_cols(),
                (GridMode::Paxos, _) => {
                    let mut out = Vec::with_capacity(rows * cols);
                    for r in self.grid_rows() {
                        for c in self.grid_cols() {
                            out.push(r.union(c));
                        }
                    }
                    out
                }
            }),
            Rule::Explicit { q1, q2 } => {
                let family = match phase {
                    Phase::One => q1,
                    Phase::Two => q2,
                };
                Ok(family
                    .iter()
                    .filter(|s| !family.iter().any(|t| t != *s && t.is_subset(**s)))
                    .copied()
                    .collect())
            }
        }
    }

    /// Checks that every phase-1 quorum meets every phase-2 quorum.
    ///
    /// Uses full powerset enumeration up to [`POWERSET_LIMIT`] acceptors and
    /// minimal phase-2 quorum enumeration up to [`EXHAUSTIVE_LIMIT`]. Larger
    /// systems report [`Intersection::Unverifiable`].
    pub fn validate_cross_intersection(&self) -> Intersection {
        let universe = self.universe();
        // Upward closure: some Q1 avoids q2 iff the complement of q2 is a Q1.
        let violated_by = |q2: AcceptorSet| {
            let rest = universe.difference(q2);
            if self.contains_quorum(Phase::One, rest) {
                Some(Intersection::Violated { q1: rest, q2 })
            } else {
                None
            }
        };
        if self.n <= POWERSET_LIMIT {
            for bits in 0..(1u64 << self.n) {
                let s = AcceptorSet(bits);
                if self.contains_quorum(Phase::Two, s) {
                    if let Some(v) = violated_by(s) {
                        return v;
                    }
                }
            }
            Intersection::Holds
        } else if self.n <= EXHAUSTIVE_LIMIT {
            match self.minimal_quorums(Phase::Two) {
                Ok(q2s) => q2s
                    .into_iter()
                    .find_map(violated_by)
                    .unwrap_or(Intersection::Holds),
                Err(_) => Intersection::Unverifiable { n: self.n },
            }
        } else {
            Intersection::Unverifiable { n: self.n }
        }
    }

    /// How many acceptor failures each phase survives.
    ///
    /// Exhaustive over failure sets up to [`EXHAUSTIVE_LIMIT`] acceptors;
    /// closed forms for threshold and grid systems beyond that.
    pub fn failure_tolerance(&self) -> Result<FaultToleranceReport, QuorumError> {
        if self.n <= EXHAUSTIVE_LIMIT {
            self.failure_tolerance_exhaustive()
        } else {
            self.failure_tolerance_closed_form()
        }
    }

    /// Enumerates every failure set.
    pub fn failure_tolerance_exhaustive(&self) -> Result<FaultToleranceReport, QuorumError> {
        if self.n > EXHAUSTIVE_LIMIT {
            return Err(QuorumError::Unverifiable {
                n: self.n,
                limit: EXHAUSTIVE_LIMIT,
            });
        }
        let n = self.n;
        let universe = self.universe();
        let mut every_both = vec![true; n + 1];
        let mut some_q2 = vec![false; n + 1];
        let mut some_both = vec![false; n + 1];
        for bits in 0..(1u64 << n) {
            let failed = AcceptorSet(bits);
            let alive = universe.difference(failed);
            let f = failed.len();
            let q1 = self.contains_quorum(Phase::One, alive);
            let q2 = self.contains_quorum(Phase::Two, alive);
            if !(q1 && q2) {
                every_both[f] = false;
            }
            some_q2[f] |= q2;
            some_both[f] |= q1 && q2;
        }
        debug_assert!(
            every_both[0],
            "families are non-empty subsets of the universe"
        );
        let guaranteed_f = (0..=n).take_while(|&f| every_both[f]).last().unwrap_or(0);
        let phase2_only_max_f = (0..=n).filter(|&f| some_q2[f]).max().unwrap_or(0);
        let best_case_f = (0..=n).filter(|&f| some_both[f]).max().unwrap_or(0);
        Ok(FaultToleranceReport {
            guaranteed_f,
            worst_case_blocking_f: (guaranteed_f + 1).min(n),
            phase2_only_max_f,
            best_case_f,
        })
    }

    /// Closed forms for threshold and grid systems.
    pub fn failure_tolerance_closed_form(&self) -> Result<FaultToleranceReport, QuorumError> {
        let n = self.n;
        let (guaranteed_f, phase2_only_max_f, best_case_f) = match &self.rule {
            Rule::Threshold { q1, q2 } => {
                let both = n - (*q1).max(*q2);
                (both, n - q2, both)
            }
            Rule::Grid { rows, cols, mode } => {
                let guaranteed = rows.min(cols) - 1;
                let best = (rows - 1) * (cols - 1);
                let phase2 = match mode {
                    GridMode::Fpaxos => n - rows,
                    GridMode::Paxos => best,
                };
                (guaranteed, phase2, best)
            }
            Rule::Explicit { .. } => {
                return Err(QuorumError::Unverifiable {
                    n,
                    limit: EXHAUSTIVE_LIMIT,
                })
            }
        };
        Ok(FaultToleranceReport {
            guaranteed_f,
            worst_case_blocking_f: (guaranteed_f + 1).min(n),
            phase2_only_max_f,
            best_case_f,
        })
    }

    /// Picks a quorum of `phase` greedily from `order`, then drops members
    /// not needed, last-added first. `None` if the listed acceptors cannot
    /// form a quorum.
    pub fn select(
        &self,
        phase: Phase,
        order: impl IntoIterator<Item = AcceptorId>,
    ) -> Option<AcceptorSet> {
        let mut chosen = AcceptorSet::empty();
        let mut added = Vec::new();
        for id in order {
            if id.index() >= self.n || chosen.contains(id) {
                continue;
            }
            if self.contains_quorum(phase, chosen) {
                break;
            }
            chosen.insert(id);
            added.push(id);
        }
        if !self.contains_quorum(phase, chosen) {
            return None;
        }
        for id in added.into_iter().rev() {
            let mut smaller = chosen;
            smaller.remove(id);
            if self.contains_quorum(phase, smaller) {
                chosen = smaller;
            }
        }
        Some(chosen)
    }
}

/// Outcome of [`QuorumSystem::validate_cross_intersection`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum Intersection {
    Holds,
    /// A disjoint pair witnessing the failure.
    Violated {
        q1: AcceptorSet,
        q2: AcceptorSet,
    },
    Unverifiable {
        n: usize,
    },
}

impl Intersection {
    /// `Some(true)` if verified, `Some(false)` if violated, `None` if unverifiable.
    pub fn verdict(self) -> Option<bool> {
        match self {
            Intersection::Holds => Some(true),
            Intersection::Violated { .. } => Some(false),
            Intersection::Unverifiable { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultToleranceReport {
    /// Largest f such that every failure set of size f leaves both phases formable.
    pub guaranteed_f: usize,
    /// Smallest f such that some failure set of size f blocks a phase.
    pub worst_case_blocking_f: usize,
    /// Largest f such that some failure set of size f leaves a phase-2 quorum.
    pub phase2_only_max_f: usize,
    /// Largest f such that some failure set of size f leaves both phases formable.
    pub best_case_f: usize,
}

/// All `k`-element subsets of `{0..n}` in colexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<AcceptorSet> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![AcceptorSet::empty()];
    }
    if k == 64 {
        return vec![AcceptorSet::full(64)];
    }
    let limit = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut out = Vec::new();
    let mut x: u64 = (1u64 << k) - 1;
    loop {
        out.push(AcceptorSet(x));
        // Gosper's hack: next integer with the same popcount.
        let c = x & x.wrapping_neg();
        let r = x.wrapping_add(c);
        if r == 0 {
            break;
        }
        x = (((r ^ x) >> 2) / c) | r;
        if x > limit || x == 0 {
            break;
        }
    }
    out
}

/// How a proposer orders acceptors when choosing whom to send to.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum TargetStrategy {
    /// Lowest indices first.
    #[default]
    FixedFirst,
    /// Start one acceptor later on each selection.
    Rotating,
    /// Seeded shuffle per selection.
    Seeded { seed: u64 },
    /// A fixed preference list; acceptors not listed follow in index order.
    Preferred { order: Vec<AcceptorId> },
}

/// Stateful iterator over a [`TargetStrategy`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSelector {
    strategy: TargetStrategy,
    counter: u64,
}

impl TargetSelector {
    pub fn new(strategy: TargetStrategy) -> Self {
        TargetSelector {
            strategy,
            counter: 0,
        }
    }

    pub fn strategy(&self) -> &TargetStrategy {
        &self.strategy
    }

    /// The next preference order over `n` acceptors.
    pub fn next_order(&mut self, n: usize) -> Vec<AcceptorId> {
        let k = self.counter;
        self.counter += 1;
        let mut ids: Vec<AcceptorId> = (0..n as u32).map(AcceptorId).collect();
        match &self.strategy {
            TargetStrategy::FixedFirst => {}
            TargetStrategy::Rotating => {
                if n > 0 {
                    ids.rotate_left((k % n as u64) as usize);
                }
            }
            TargetStrategy::Seeded { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                );
                ids.shuffle(&mut rng);
            }
            TargetStrategy::Preferred { order } => {
                let mut seen = AcceptorSet::empty();
                let mut out = Vec::with_capacity(n);
                for &id in order {
                    if id.index() < n && !seen.contains(id) {
                        seen.insert(id);
                        out.push(id);
                    }
                }
                out.extend(ids.into_iter().filter(|id| !seen.contains(*id)));
                ids = out;
            }
        }
        ids
    }

    /// Picks a quorum for `phase`, pushing acceptors in `avoid` to the back
    /// of the preference order.
    pub fn pick(
        &mut self,
        qs: &QuorumSystem,
        phase: Phase,
        avoid: AcceptorSet,
    ) -> Option<AcceptorSet> {
        let order = self.next_order(qs.n());
        let (front, back): (Vec<_>, Vec<_>) = order.into_iter().partition(|a| !avoid.contains(*a));
        qs.select(phase, front.into_iter().chain(back))
    }
}

impl Default for TargetSelector {
    fn default() -> Self {
        TargetSelector::new(TargetStrategy::FixedFirst)
    }
}
