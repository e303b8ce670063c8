//! Bounded explicit-state checking of single-decree Paxos with flexible
//! quorums.
//!
//! Messages are modelled as a set that only grows: a sent message can be
//! received any number of times, at any point, or never. This covers loss,
//! delay, reordering and duplication without modelling a network. After
//! every transition two properties are checked:
//!
//! * **agreement**: all decided `(ballot, value)` pairs carry one value;
//! * **theorem2**: once `(p, v)` is decided, no propose `(p', v')` with
//!   `p' > p` and `v' != v` has been sent.
//!
//! Every counterexample can be replayed through the acceptor and proposer
//! code in [`crate::synod`] with [`replay`].

mod replay;
mod state;
mod sweep;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quorum::{AcceptorId, QuorumSystem};
use crate::types::{Ballot, ProposerId, Value};

pub use replay::{replay, ReplayError, ReplayReport};
pub use sweep::{quorum_safety_sweep, SweepEntry, SweepReport};

use state::{IAction, Model, Perm, State, MAX_B, MAX_N, MAX_V};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Agreement,
    Theorem2,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Agreement => "agreement",
            Property::Theorem2 => "theorem2",
        })
    }
}

fn default_properties() -> Vec<Property> {
    vec![Property::Agreement, Property::Theorem2]
}

fn default_max_states() -> u64 {
    5_000_000
}

fn default_two() -> u8 {
    2
}

/// What to explore. Values are named `a`, `b`, ... and ballot round `r`
/// belongs to proposer `(r - 1) % proposers`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub quorum: QuorumSystem,
    #[serde(default = "default_two")]
    pub ballots: u8,
    #[serde(default = "default_two")]
    pub values: u8,
    #[serde(default = "default_two")]
    pub proposers: u8,
    #[serde(default = "default_max_states")]
    pub max_states: u64,
    /// Merge states equal up to acceptor and value relabeling.
    #[serde(default)]
    pub symmetry: bool,
    /// How many times acceptors may lose their state.
    #[serde(default)]
    pub amnesia: u8,
    #[serde(default = "default_properties")]
    pub properties: Vec<Property>,
    /// Stop at the first violation of any property.
    #[serde(default)]
    pub stop_at_first: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("invalid check config: {0}")]
    InvalidConfig(String),
}

impl CheckConfig {
    pub fn new(quorum: QuorumSystem, ballots: u8, values: u8) -> Self {
        CheckConfig {
            quorum,
            ballots,
            values,
            proposers: 2,
            max_states: default_max_states(),
            symmetry: false,
            amnesia: 0,
            properties: default_properties(),
            stop_at_first: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, CheckError> {
        let cfg: CheckConfig =
            serde_json::from_str(s).map_err(|e| CheckError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CheckError> {
        let bad = |m: String| Err(CheckError::InvalidConfig(m));
        if self.quorum.n() > MAX_N {
            return bad(format!(
                "at most {MAX_N} acceptors, got {}",
                self.quorum.n()
            ));
        }
        if !(1..=MAX_B as u8).contains(&self.ballots) {
            return bad(format!(
                "ballots must be in 1..={MAX_B}, got {}",
                self.ballots
            ));
        }
        if !(1..=MAX_V as u8).contains(&self.values) {
            return bad(format!(
                "values must be in 1..={MAX_V}, got {}",
                self.values
            ));
        }
        if self.proposers == 0 {
            return bad("at least one proposer is needed".into());
        }
        if self.properties.is_empty() {
            return bad("no property to check".into());
        }
        Ok(())
    }

    pub fn ballot(&self, b: u8) -> Ballot {
        Ballot::new(b as u64, ProposerId(((b - 1) % self.proposers) as u32))
    }

    pub fn value(&self, v: u8) -> Value {
        Value::new(vec![b'a' + v])
    }

    fn ballot_index(&self, b: Ballot) -> Option<u8> {
        let r = u8::try_from(b.round).ok()?;
        ((1..=self.ballots).contains(&r) && self.ballot(r) == b).then_some(r)
    }

    fn value_index(&self, v: &Value) -> Option<u8> {
        (0..self.values).find(|&i| self.value(i) == *v)
    }

    fn model(&self) -> Model {
        Model::new(
            &self.quorum,
            self.ballots,
            self.values,
            self.amnesia,
            self.symmetry,
        )
    }
}

/// One step of a counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    SendPrepare {
        ballot: Ballot,
    },
    Promise {
        acceptor: AcceptorId,
        ballot: Ballot,
    },
    /// Sent once promises from `quorum` arrived, in that order.
    SendPropose {
        ballot: Ballot,
        value: Value,
        quorum: Vec<AcceptorId>,
    },
    Accept {
        acceptor: AcceptorId,
        ballot: Ballot,
    },
    /// The acceptor restarts without its promised and accepted state.
    Amnesia {
        acceptor: AcceptorId,
    },
}

impl Action {
    fn from_internal(cfg: &CheckConfig, a: IAction) -> Self {
        let acc = |x: u8| AcceptorId(x as u32);
        match a {
            IAction::Prepare(b) => Action::SendPrepare {
                ballot: cfg.ballot(b),
            },
            IAction::Promise(x, b) => Action::Promise {
                acceptor: acc(x),
                ballot: cfg.ballot(b),
            },
            IAction::Propose { b, v, set, last } => {
                let mut quorum: Vec<AcceptorId> = (0..8u8)
                    .filter(|&i| set & (1 << i) != 0 && i != last)
                    .map(acc)
                    .collect();
                quorum.push(acc(last));
                Action::SendPropose {
                    ballot: cfg.ballot(b),
                    value: cfg.value(v),
                    quorum,
                }
            }
            IAction::Accept(x, b) => Action::Accept {
                acceptor: acc(x),
                ballot: cfg.ballot(b),
            },
            IAction::Amnesia(x) => Action::Amnesia { acceptor: acc(x) },
        }
    }

    fn to_internal(&self, cfg: &CheckConfig) -> Option<IAction> {
        let acc = |a: AcceptorId| (a.index() < cfg.quorum.n()).then_some(a.0 as u8);
        Some(match self {
            Action::SendPrepare { ballot } => IAction::Prepare(cfg.ballot_index(*ballot)?),
            Action::Promise { acceptor, ballot } => {
                IAction::Promise(acc(*acceptor)?, cfg.ballot_index(*ballot)?)
            }
            Action::SendPropose {
                ballot,
                value,
                quorum,
            } => {
                let (last, rest) = quorum.split_last()?;
                let mut set = 0u8;
                for a in rest {
                    set |= 1 << acc(*a)?;
                }
                let last = acc(*last)?;
                if set & (1 << last) != 0 {
                    return None;
                }
                set |= 1 << last;
                IAction::Propose {
                    b: cfg.ballot_index(*ballot)?,
                    v: cfg.value_index(value)?,
                    set,
                    last,
                }
            }
            Action::Accept { acceptor, ballot } => {
                IAction::Accept(acc(*acceptor)?, cfg.ballot_index(*ballot)?)
            }
            Action::Amnesia { acceptor } => IAction::Amnesia(acc(*acceptor)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub property: Property,
    pub actions: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    /// Distinct states reached, the initial state included.
    pub states: u64,
    pub transitions: u64,
    /// Length of the longest shortest path to any explored state.
    pub depth: u32,
    /// False if the state budget ran out first.
    pub complete: bool,
    /// The shortest counterexample found for each violated property.
    pub violations: Vec<Violation>,
}

impl CheckResult {
    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation(&self, p: Property) -> Option<&Violation> {
        self.violations.iter().find(|v| v.property == p)
    }
}

struct Parent {
    from: u32,
    action: IAction,
    /// Index of the symmetry that mapped the successor to its canonical form.
    perm: Option<usize>,
}

/// Breadth-first search over all states within the bounds.
pub fn explore(cfg: &CheckConfig) -> Result<CheckResult, CheckError> {
    cfg.validate()?;
    let model = cfg.model();
    let root = State::default();
    let mut index: HashMap<State, u32> = HashMap::new();
    let mut parents: Vec<Option<Parent>> = vec![None];
    index.insert(root.clone(), 0);
    let mut frontier: VecDeque<(State, u32, u32)> = VecDeque::from([(root, 0, 0)]);
    let mut result = CheckResult {
        states: 1,
        transitions: 0,
        depth: 0,
        complete: true,
        violations: Vec::new(),
    };
    let mut succ = Vec::new();
    let wanted =
        |p: Property, r: &CheckResult| cfg.properties.contains(&p) && r.violation(p).is_none();

    'search: while let Some((state, id, depth)) = frontier.pop_front() {
        model.successors(&state, &mut succ);
        for (action, next) in succ.drain(..) {
            result.transitions += 1;
            let (canon, perm) = model.canonical(next);
            if index.contains_key(&canon) {
                continue;
            }
            let new_id = parents.len() as u32;
            parents.push(Some(Parent {
                from: id,
                action,
                perm,
            }));
            result.states += 1;
            result.depth = result.depth.max(depth + 1);
            for (prop, holds) in [
                (Property::Agreement, model.agreement_holds(&canon)),
                (Property::Theorem2, model.theorem2_holds(&canon)),
            ] {
                if !holds && wanted(prop, &result) {
                    let actions = path(cfg, &model, &parents, new_id);
                    result.violations.push(Violation {
                        property: prop,
                        actions,
                    });
                }
            }
            let done = cfg
                .properties
                .iter()
                .all(|p| result.violation(*p).is_some());
            if done || (cfg.stop_at_first && !result.violations.is_empty()) {
                // Every requested property already has a counterexample.
                result.complete = false;
                break 'search;
            }
            if result.states >= cfg.max_states {
                result.complete = false;
                break 'search;
            }
            index.insert(canon.clone(), new_id);
            frontier.push_back((canon, new_id, depth + 1));
        }
    }
    result.violations.sort_by_key(|v| v.property);
    Ok(result)
}

/// Rebuilds a concrete action path to state `id`, undoing the symmetry
/// applied at each canonicalization.
fn path(cfg: &CheckConfig, model: &Model, parents: &[Option<Parent>], mut id: u32) -> Vec<Action> {
    let mut steps = Vec::new();
    while let Some(p) = &parents[id as usize] {
        steps.push((p.action, p.perm));
        id = p.from;
    }
    steps.reverse();
    let mut sigma = Perm::identity();
    let mut out = Vec::with_capacity(steps.len());
    for (action, perm) in steps {
        out.push(Action::from_internal(cfg, sigma.action(action)));
        if let Some(i) = perm {
            sigma = sigma.compose(&model.perms[i].inverse());
        }
    }
    out
}

/// A violation plus the config that produced it, as JSON lines: a header
/// `{"property":..,"config":..}` followed by one action per line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub property: Property,
    pub config: CheckConfig,
    pub actions: Vec<Action>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    property: Property,
    config: CheckConfig,
}

#[derive(Debug, Error)]
pub enum CounterexampleError {
    #[error("counterexample is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Config(#[from] CheckError),
}

impl Counterexample {
    pub fn new(config: &CheckConfig, v: &Violation) -> Self {
        Counterexample {
            property: v.property,
            config: config.clone(),
            actions: v.actions.clone(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            property: self.property,
            config: self.config.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("serializable");
        out.push('\n');
        for a in &self.actions {
            out.push_str(&serde_json::to_string(a).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Self, CounterexampleError> {
        let mut lines = s.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (i, first) = lines.next().ok_or(CounterexampleError::Empty)?;
        let header: Header =
            serde_json::from_str(first).map_err(|source| CounterexampleError::Json {
                line: i + 1,
                source,
            })?;
        header.config.validate()?;
        let actions = lines
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|source| CounterexampleError::Json {
                    line: i + 1,
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Counterexample {
            property: header.property,
            config: header.config,
            actions,
        })
    }
}
