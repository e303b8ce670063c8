//! Flexible Paxos: consensus where phase-1 and phase-2 quorums only need to
//! intersect each other.
//!
//! - [`quorum`]: quorum systems, intersection validation, failure tolerance.
//! - [`synod`]: single-decree acceptor/proposer state machines and the learner rule.
//! - [`multi`]: Multi-Paxos replicas over a slot-indexed log.
//! - [`sim`]: deterministic discrete-event simulator with fault injection.
//! - [`checker`]: exhaustive bounded safety checker with replay through [`synod`].

pub mod checker;
pub mod multi;
pub mod quorum;
pub mod sim;
pub mod synod;
pub mod types;

pub use quorum::{AcceptorId, AcceptorSet, GridMode, Phase, QuorumError, QuorumKind, QuorumSystem};
pub use types::{Accepted, Ballot, Node, ProposerId, Value};
