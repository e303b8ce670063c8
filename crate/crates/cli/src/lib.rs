//! Subcommand implementations behind the `fpaxos` binary. Each `run`
//! returns `Ok(false)` when it found a safety violation.

pub mod analyze;
pub mod args;
pub mod check;
pub mod replay;
pub mod show;
pub mod simulate;
pub mod sweep;
