use std::io::{self, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::types::{Ballot, Node, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Loss,
    Partition,
    Crashed,
}

/// What happened at one instant. `M` is the message type of the protocol
/// being traced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind<M> {
    Send {
        msg: M,
    },
    Duplicate {
        msg: M,
    },
    Deliver {
        msg: M,
    },
    Drop {
        msg: M,
        reason: DropReason,
    },
    Crash {
        replica: u32,
        lose_memory: bool,
    },
    Restore {
        replica: u32,
    },
    Partition {
        groups: Vec<Vec<u32>>,
    },
    Elect {
        replica: u32,
    },
    Elected {
        replica: u32,
        ballot: Ballot,
    },
    Decide {
        node: Node,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slot: Option<u64>,
        ballot: Ballot,
        value: Value,
    },
    ClientTimeout {
        id: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent<M> {
    /// Virtual time in microseconds (a step counter for scripted runs).
    pub t_us: u64,
    #[serde(flatten)]
    pub kind: EventKind<M>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace<M> {
    pub events: Vec<TraceEvent<M>>,
}

impl<M> Default for Trace<M> {
    fn default() -> Self {
        Trace { events: Vec::new() }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("trace line {line}: {source}")]
pub struct TraceParseError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

impl<M: Serialize> Trace<M> {
    pub fn push(&mut self, t_us: u64, kind: EventKind<M>) {
        self.events.push(TraceEvent { t_us, kind });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// One JSON object per line, each terminated by `\n`.
    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON output is UTF-8")
    }
}

impl<M: DeserializeOwned> Trace<M> {
    /// Parses JSON lines, skipping blank lines.
    pub fn from_jsonl(s: &str) -> Result<Self, TraceParseError> {
        let mut events = Vec::new();
        for (i, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ev = serde_json::from_str(line).map_err(|source| TraceParseError {
                line: i + 1,
                source,
            })?;
            events.push(ev);
        }
        Ok(Trace { events })
    }
}
