//! Ballots, values and node addresses shared by every protocol layer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::quorum::AcceptorId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProposerId(pub u32);

impl fmt::Display for ProposerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// A proposal number. Ordered by round, then proposer, so two proposers
/// never share a ballot.
///
/// Serializes as `[round, proposer]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(u64, u32)", into = "(u64, u32)")]
pub struct Ballot {
    pub round: u64,
    pub proposer: ProposerId,
}

impl Ballot {
    pub const fn new(round: u64, proposer: ProposerId) -> Self {
        Ballot { round, proposer }
    }

    /// The smallest ballot of `proposer` that beats `other`.
    pub fn successor(other: Option<Ballot>, proposer: ProposerId) -> Ballot {
        let round = other.map_or(1, |b| b.round + 1);
        Ballot { round, proposer }
    }
}

impl From<(u64, u32)> for Ballot {
    fn from((round, proposer): (u64, u32)) -> Self {
        Ballot::new(round, ProposerId(proposer))
    }
}

impl From<Ballot> for (u64, u32) {
    fn from(b: Ballot) -> Self {
        (b.round, b.proposer.0)
    }
}

impl fmt::Display for Ballot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.round, self.proposer)
    }
}

/// An opaque proposed value. Equality is byte equality.
///
/// Serializes as a JSON string when the bytes are UTF-8, otherwise as an
/// array of byte values.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Value(pub Vec<u8>);

impl Value {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Value(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value(s.as_bytes().to_vec())
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) => write!(f, "{s:?}"),
            Err(_) => write!(f, "{:?}", self.0),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match std::str::from_utf8(&self.0) {
            Ok(s) => serializer.serialize_str(s),
            Err(_) => serializer.collect_seq(self.0.iter()),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Bytes(Vec<u8>),
        }
        Ok(match Repr::deserialize(deserializer)? {
            Repr::Text(s) => Value(s.into_bytes()),
            Repr::Bytes(b) => Value(b),
        })
    }
}

/// A ballot together with the value accepted at it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Accepted {
    pub ballot: Ballot,
    pub value: Value,
}

impl Accepted {
    pub fn new(ballot: Ballot, value: Value) -> Self {
        Accepted { ballot, value }
    }
}

/// A message endpoint. Renders as `A3`, `P1`, `R0` or `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Acceptor(AcceptorId),
    Proposer(ProposerId),
    Replica(AcceptorId),
    Client,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Acceptor(a) => write!(f, "A{}", a.0),
            Node::Proposer(p) => write!(f, "P{}", p.0),
            Node::Replica(r) => write!(f, "R{}", r.0),
            Node::Client => f.write_str("C"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid node address `{0}`")]
pub struct ParseNodeError(pub String);

impl FromStr for Node {
    type Err = ParseNodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "C" {
            return Ok(Node::Client);
        }
        let err = || ParseNodeError(s.chars().take(32).collect());
        let mut chars = s.chars();
        let tag = chars.next().ok_or_else(err)?;
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let idx: u32 = digits.parse().map_err(|_| err())?;
        match tag {
            'A' => Ok(Node::Acceptor(AcceptorId(idx))),
            'P' => Ok(Node::Proposer(ProposerId(idx))),
            'R' => Ok(Node::Replica(AcceptorId(idx))),
            _ => Err(err()),
        }
    }
}

impl Serialize for Node {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Node {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
