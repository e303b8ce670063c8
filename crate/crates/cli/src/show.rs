use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use fpaxos::checker::Counterexample;
use fpaxos::sim::Trace;
use serde_json::Value;

#[derive(Args, Debug)]
pub struct ShowArgs {
    /// A simulator trace or a checker counterexample (JSON lines).
    pub file: PathBuf,
}

fn line(prefix: String, mut obj: serde_json::Map<String, Value>, tag: &str) -> String {
    let name = obj
        .remove(tag)
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    let mut s = format!("{prefix}{name:<14}");
    for (k, v) in obj {
        let _ = write!(s, " {k}={}", v);
    }
    s
}

pub fn render(text: &str) -> Result<String> {
    let mut out = String::new();
    let first: Option<Value> = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .transpose()?;
    let is_cx = first
        .as_ref()
        .and_then(Value::as_object)
        .is_some_and(|o| o.contains_key("property"));
    if is_cx {
        let cx = Counterexample::from_jsonl(text)?;
        writeln!(
            out,
            "{} counterexample on {} acceptors",
            cx.property,
            cx.config.quorum.n()
        )?;
        for (i, a) in cx.actions.iter().enumerate() {
            if let Value::Object(o) = serde_json::to_value(a)? {
                writeln!(out, "{}", line(format!("{:>4}  ", i + 1), o, "action"))?;
            }
        }
    } else {
        let trace: Trace<Value> = Trace::from_jsonl(text)?;
        for ev in &trace.events {
            if let Value::Object(mut o) = serde_json::to_value(ev)? {
                o.remove("t_us");
                let t = format!("{:>12.3}  ", ev.t_us as f64 / 1000.0);
                writeln!(out, "{}", line(t, o, "event"))?;
            }
        }
    }
    Ok(out)
}

pub fn run(a: &ShowArgs) -> Result<bool> {
    let text = std::fs::read_to_string(&a.file)
        .with_context(|| format!("reading {}", a.file.display()))?;
    print!(
        "{}",
        render(&text).with_context(|| format!("parsing {}", a.file.display()))?
    );
    Ok(true)
}
