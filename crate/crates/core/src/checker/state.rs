//! Compact global state and transition relation for the explorer.
//!
//! Ballots are indices `1..=B` (0 means none), values are indices `0..V`,
//! acceptors are indices `0..n`. An accepted proposal `(b, v)` is coded as
//! `1 + (b - 1) * MAX_V + v`, with 0 for nothing accepted.

use crate::quorum::{AcceptorSet, Phase, QuorumSystem};

pub(crate) const MAX_N: usize = 8;
pub(crate) const MAX_B: usize = 4;
pub(crate) const MAX_V: usize = 4;

pub(crate) fn acc_code(b: u8, v: u8) -> u8 {
    1 + (b - 1) * MAX_V as u8 + v
}

/// `(ballot, value)` of a nonzero accepted code.
pub(crate) fn acc_decode(code: u8) -> (u8, u8) {
    let c = code - 1;
    (c / MAX_V as u8 + 1, c % MAX_V as u8)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct State {
    pub promised: [u8; MAX_N],
    pub accepted: [u8; MAX_N],
    /// Bit `b - 1` set once prepare(b) was sent.
    pub prepares: u8,
    /// 0 if acceptor `a` has not promised ballot `b`; otherwise one plus
    /// the accepted code it reported.
    pub promises: [[u8; MAX_N]; MAX_B],
    /// 0 if no propose(b) was sent; otherwise the value index plus one.
    pub proposes: [u8; MAX_B],
    /// Acceptors that sent accept(b), as a bitmask.
    pub accepts: [u8; MAX_B],
    pub amnesia: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum IAction {
    Prepare(u8),
    Promise(u8, u8),
    /// Ballot, value, the promise senders that triggered it, and which of
    /// them arrived last.
    Propose {
        b: u8,
        v: u8,
        set: u8,
        last: u8,
    },
    Accept(u8, u8),
    Amnesia(u8),
}

/// An acceptor relabeling plus a value relabeling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Perm {
    pub acc: [u8; MAX_N],
    pub val: [u8; MAX_V],
}

impl Perm {
    pub fn identity() -> Self {
        let mut acc = [0; MAX_N];
        let mut val = [0; MAX_V];
        for (i, x) in acc.iter_mut().enumerate() {
            *x = i as u8;
        }
        for (i, x) in val.iter_mut().enumerate() {
            *x = i as u8;
        }
        Perm { acc, val }
    }

    pub fn inverse(&self) -> Self {
        let mut out = Perm::identity();
        for i in 0..MAX_N {
            out.acc[self.acc[i] as usize] = i as u8;
        }
        for i in 0..MAX_V {
            out.val[self.val[i] as usize] = i as u8;
        }
        out
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Perm) -> Self {
        let mut out = Perm::identity();
        for i in 0..MAX_N {
            out.acc[i] = self.acc[other.acc[i] as usize];
        }
        for i in 0..MAX_V {
            out.val[i] = self.val[other.val[i] as usize];
        }
        out
    }

    fn mask(&self, m: u8) -> u8 {
        let mut out = 0;
        for i in 0..MAX_N {
            if m & (1 << i) != 0 {
                out |= 1 << self.acc[i];
            }
        }
        out
    }

    fn code(&self, c: u8) -> u8 {
        if c == 0 {
            return 0;
        }
        let (b, v) = acc_decode(c);
        acc_code(b, self.val[v as usize])
    }

    pub fn state(&self, s: &State) -> State {
        let mut out = State {
            prepares: s.prepares,
            amnesia: s.amnesia,
            ..State::default()
        };
        for a in 0..MAX_N {
            let t = self.acc[a] as usize;
            out.promised[t] = s.promised[a];
            out.accepted[t] = self.code(s.accepted[a]);
            for b in 0..MAX_B {
                let p = s.promises[b][a];
                out.promises[b][t] = if p == 0 { 0 } else { 1 + self.code(p - 1) };
            }
        }
        for b in 0..MAX_B {
            out.proposes[b] = match s.proposes[b] {
                0 => 0,
                v => self.val[(v - 1) as usize] + 1,
            };
            out.accepts[b] = self.mask(s.accepts[b]);
        }
        out
    }

    pub fn action(&self, a: IAction) -> IAction {
        match a {
            IAction::Prepare(b) => IAction::Prepare(b),
            IAction::Promise(x, b) => IAction::Promise(self.acc[x as usize], b),
            IAction::Propose { b, v, set, last } => IAction::Propose {
                b,
                v: self.val[v as usize],
                set: self.mask(set),
                last: self.acc[last as usize],
            },
            IAction::Accept(x, b) => IAction::Accept(self.acc[x as usize], b),
            IAction::Amnesia(x) => IAction::Amnesia(self.acc[x as usize]),
        }
    }
}

/// Bounds and precomputed quorum tables.
pub(crate) struct Model {
    pub n: usize,
    pub ballots: u8,
    pub values: u8,
    pub amnesia: u8,
    q1: Vec<bool>,
    q2: Vec<bool>,
    /// Symmetries used for canonicalization; empty when reduction is off.
    pub perms: Vec<Perm>,
}

impl Model {
    pub fn new(qs: &QuorumSystem, ballots: u8, values: u8, amnesia: u8, symmetry: bool) -> Self {
        let n = qs.n();
        let table = |phase| {
            (0..1u64 << n)
                .map(|m| qs.contains_quorum(phase, AcceptorSet::from_bits(m)))
                .collect::<Vec<bool>>()
        };
        let q1 = table(Phase::One);
        let q2 = table(Phase::Two);
        let mut model = Model {
            n,
            ballots,
            values,
            amnesia,
            q1,
            q2,
            perms: Vec::new(),
        };
        if symmetry {
            model.perms = model.symmetries();
        }
        model
    }

    pub fn is_q1(&self, m: u8) -> bool {
        self.q1[m as usize]
    }

    pub fn is_q2(&self, m: u8) -> bool {
        self.q2[m as usize]
    }

    /// Acceptor permutations preserving both quorum families, times all
    /// value permutations.
    fn symmetries(&self) -> Vec<Perm> {
        let n = self.n;
        let mut acc_perms = Vec::new();
        let mut p: Vec<u8> = (0..n as u8).collect();
        permutations(&mut p, 0, &mut |p| {
            let mut perm = Perm::identity();
            perm.acc[..n].copy_from_slice(p);
            let keeps = (0..1u32 << n).all(|m| {
                let pm = perm.mask(m as u8) as usize;
                self.q1[m as usize] == self.q1[pm] && self.q2[m as usize] == self.q2[pm]
            });
            if keeps {
                acc_perms.push(perm);
            }
        });
        let v = self.values as usize;
        let mut out = Vec::new();
        let mut vals: Vec<u8> = (0..v as u8).collect();
        permutations(&mut vals, 0, &mut |vp| {
            for ap in &acc_perms {
                let mut perm = ap.clone();
                perm.val[..v].copy_from_slice(vp);
                out.push(perm);
            }
        });
        out
    }

    /// The least image of `s` under the symmetry group, and the index of a
    /// permutation producing it.
    pub fn canonical(&self, s: State) -> (State, Option<usize>) {
        if self.perms.is_empty() {
            return (s, None);
        }
        let mut best = s.clone();
        let mut best_i = None;
        for (i, p) in self.perms.iter().enumerate() {
            let t = p.state(&s);
            if t < best {
                best = t;
                best_i = Some(i);
            }
        }
        (best, best_i)
    }

    fn prepared(&self, s: &State, b: u8) -> bool {
        s.prepares & (1 << (b - 1)) != 0
    }

    /// The promise senders for ballot `b`.
    pub fn senders(&self, s: &State, b: u8) -> u8 {
        let mut m = 0;
        for a in 0..self.n {
            if s.promises[(b - 1) as usize][a] != 0 {
                m |= 1 << a;
            }
        }
        m
    }

    /// The value a proposer must send after hearing from `set`, if forced.
    pub fn forced_value(&self, s: &State, b: u8, set: u8) -> Option<u8> {
        let mut best: Option<(u8, u8)> = None;
        for a in 0..self.n {
            if set & (1 << a) == 0 {
                continue;
            }
            let p = s.promises[(b - 1) as usize][a];
            if p > 1 {
                let (bb, v) = acc_decode(p - 1);
                if best.is_none_or(|(b0, _)| bb > b0) {
                    best = Some((bb, v));
                }
            }
        }
        best.map(|(_, v)| v)
    }

    /// Whether `set` can be the promise-sender set at the moment a
    /// proposer first holds a phase-1 quorum; returns the acceptor that
    /// completed it.
    pub fn trigger(&self, set: u8) -> Option<u8> {
        if !self.is_q1(set) {
            return None;
        }
        (0..self.n as u8).find(|&e| set & (1 << e) != 0 && !self.is_q1(set & !(1 << e)))
    }

    /// Whether `a` is enabled in `s`.
    pub fn enabled(&self, s: &State, a: IAction) -> bool {
        match a {
            IAction::Prepare(b) => (1..=self.ballots).contains(&b) && !self.prepared(s, b),
            IAction::Promise(x, b) => {
                (x as usize) < self.n
                    && (1..=self.ballots).contains(&b)
                    && self.prepared(s, b)
                    && s.promised[x as usize] < b
            }
            IAction::Propose { b, v, set, last } => {
                (1..=self.ballots).contains(&b)
                    && v < self.values
                    && s.proposes[(b - 1) as usize] == 0
                    && set & !self.senders(s, b) == 0
                    && (last as usize) < self.n
                    && set & (1 << last) != 0
                    && self.is_q1(set)
                    && !self.is_q1(set & !(1 << last))
                    && self.forced_value(s, b, set).is_none_or(|f| f == v)
            }
            IAction::Accept(x, b) => {
                if (x as usize) >= self.n || !(1..=self.ballots).contains(&b) {
                    return false;
                }
                let pv = s.proposes[(b - 1) as usize];
                pv != 0
                    && s.promised[x as usize] <= b
                    && s.accepted[x as usize] != acc_code(b, pv - 1)
            }
            IAction::Amnesia(x) => {
                (x as usize) < self.n && s.amnesia < self.amnesia && s.promised[x as usize] != 0
            }
        }
    }

    /// Applies an enabled action.
    pub fn apply(&self, s: &State, a: IAction) -> State {
        let mut t = s.clone();
        match a {
            IAction::Prepare(b) => t.prepares |= 1 << (b - 1),
            IAction::Promise(x, b) => {
                let x = x as usize;
                t.promises[(b - 1) as usize][x] = 1 + s.accepted[x];
                t.promised[x] = b;
            }
            IAction::Propose { b, v, .. } => t.proposes[(b - 1) as usize] = v + 1,
            IAction::Accept(x, b) => {
                let v = s.proposes[(b - 1) as usize] - 1;
                t.promised[x as usize] = b;
                t.accepted[x as usize] = acc_code(b, v);
                t.accepts[(b - 1) as usize] |= 1 << x;
            }
            IAction::Amnesia(x) => {
                t.promised[x as usize] = 0;
                t.accepted[x as usize] = 0;
                t.amnesia += 1;
            }
        }
        t
    }

    pub fn successors(&self, s: &State, out: &mut Vec<(IAction, State)>) {
        out.clear();
        for b in 1..=self.ballots {
            if !self.prepared(s, b) {
                out.push((IAction::Prepare(b), self.apply(s, IAction::Prepare(b))));
            }
        }
        for b in 1..=self.ballots {
            if !self.prepared(s, b) {
                continue;
            }
            for x in 0..self.n as u8 {
                let a = IAction::Promise(x, b);
                if self.enabled(s, a) {
                    out.push((a, self.apply(s, a)));
                }
            }
        }
        for b in 1..=self.ballots {
            if s.proposes[(b - 1) as usize] != 0 {
                continue;
            }
            let senders = self.senders(s, b);
            if !self.is_q1(senders) {
                continue;
            }
            // One successor per reachable value; the witness set is the
            // first trigger set found for it.
            let mut seen = [false; MAX_V];
            let mut sub = senders;
            loop {
                if let Some(last) = self.trigger(sub) {
                    let choices = match self.forced_value(s, b, sub) {
                        Some(v) => v..v + 1,
                        None => 0..self.values,
                    };
                    for v in choices {
                        if !seen[v as usize] {
                            seen[v as usize] = true;
                            let a = IAction::Propose {
                                b,
                                v,
                                set: sub,
                                last,
                            };
                            out.push((a, self.apply(s, a)));
                        }
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & senders;
            }
        }
        for b in 1..=self.ballots {
            for x in 0..self.n as u8 {
                let a = IAction::Accept(x, b);
                if self.enabled(s, a) {
                    out.push((a, self.apply(s, a)));
                }
            }
        }
        if s.amnesia < self.amnesia {
            for x in 0..self.n as u8 {
                if s.promised[x as usize] != 0 {
                    let a = IAction::Amnesia(x);
                    out.push((a, self.apply(s, a)));
                }
            }
        }
    }

    /// Every `(ballot, value)` whose accept messages cover a phase-2 quorum.
    pub fn decided(&self, s: &State) -> Vec<(u8, u8)> {
        (1..=self.ballots)
            .filter_map(|b| {
                let i = (b - 1) as usize;
                (s.proposes[i] != 0 && self.is_q2(s.accepts[i])).then(|| (b, s.proposes[i] - 1))
            })
            .collect()
    }

    pub fn agreement_holds(&self, s: &State) -> bool {
        let d = self.decided(s);
        d.iter().all(|x| x.1 == d[0].1)
    }

    pub fn theorem2_holds(&self, s: &State) -> bool {
        self.decided(s).iter().all(|&(p, v)| {
            (p + 1..=self.ballots).all(|q| {
                let pv = s.proposes[(q - 1) as usize];
                pv == 0 || pv - 1 == v
            })
        })
    }
}

fn permutations(items: &mut Vec<u8>, k: usize, f: &mut impl FnMut(&[u8])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, f);
        items.swap(k, i);
    }
}
