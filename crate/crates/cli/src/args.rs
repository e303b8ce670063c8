//! Flag groups and the small text formats used by repeated flags.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use fpaxos::sim::{CrashEvent, LatencyModel, PartitionChange, ReplicaEvent, SimStrategy};
use fpaxos::{AcceptorId, AcceptorSet, GridMode, QuorumSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Majority,
    Simple,
    Grid,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Fpaxos,
    Paxos,
}

/// Flags that describe a quorum system.
#[derive(Args, Clone, Debug, Default)]
pub struct QuorumArgs {
    /// Quorum construction; inferred from the other flags when omitted.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Number of acceptors.
    #[arg(long)]
    pub n: Option<usize>,
    /// Phase-2 quorum size for `simple`.
    #[arg(long)]
    pub q2: Option<usize>,
    /// Majority with phase-2 quorums of ceil(n/2).
    #[arg(long)]
    pub improved: bool,
    /// Grid rows; acceptors are numbered row-major.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Grid columns.
    #[arg(long)]
    pub cols: Option<usize>,
    /// Grid quorum mode (default fpaxos).
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Explicit minimal quorums, e.g. `q1='[[0,1]]' q2='[[1],[0]]'`.
    #[arg(long, num_args = 2, value_names = ["Q1", "Q2"])]
    pub custom: Option<Vec<String>>,
}

impl QuorumArgs {
    pub fn is_empty(&self) -> bool {
        self.kind.is_none()
            && self.n.is_none()
            && self.q2.is_none()
            && !self.improved
            && self.rows.is_none()
            && self.cols.is_none()
            && self.mode.is_none()
            && self.custom.is_none()
    }

    fn inferred_kind(&self) -> KindArg {
        if let Some(k) = self.kind {
            k
        } else if self.custom.is_some() {
            KindArg::Custom
        } else if self.rows.is_some() || self.cols.is_some() {
            KindArg::Grid
        } else if self.q2.is_some() {
            KindArg::Simple
        } else {
            KindArg::Majority
        }
    }

    /// The described system, or `None` when no quorum flag was given.
    pub fn build(&self) -> Result<Option<QuorumSystem>> {
        if self.is_empty() {
            return Ok(None);
        }
        let need = |v: Option<usize>, flag: &str| {
            v.ok_or_else(|| anyhow!("--{flag} is required for this quorum kind"))
        };
        let qs = match self.inferred_kind() {
            KindArg::Majority => QuorumSystem::majority(need(self.n, "n")?, self.improved)?,
            KindArg::Simple => QuorumSystem::simple(need(self.n, "n")?, need(self.q2, "q2")?)?,
            KindArg::Grid => {
                let mode = match self.mode.unwrap_or(ModeArg::Fpaxos) {
                    ModeArg::Fpaxos => GridMode::Fpaxos,
                    ModeArg::Paxos => GridMode::Paxos,
                };
                let qs =
                    QuorumSystem::grid(need(self.rows, "rows")?, need(self.cols, "cols")?, mode)?;
                if let Some(n) = self.n {
                    if n != qs.n() {
                        bail!("--n {n} does not match a {} acceptor grid", qs.n());
                    }
                }
                qs
            }
            KindArg::Custom => {
                let parts = self
                    .custom
                    .as_deref()
                    .ok_or_else(|| anyhow!("--custom needs q1=... q2=..."))?;
                let (mut q1, mut q2) = (None, None);
                for p in parts {
                    let (key, json) = p
                        .split_once('=')
                        .ok_or_else(|| anyhow!("expected q1=JSON or q2=JSON, got `{p}`"))?;
                    let sets = parse_family(json).with_context(|| format!("parsing {key}"))?;
                    match key.trim() {
                        "q1" => q1 = Some(sets),
                        "q2" => q2 = Some(sets),
                        other => bail!("unknown quorum family `{other}`, expected q1 or q2"),
                    }
                }
                let (q1, q2) = (q1.context("missing q1=...")?, q2.context("missing q2=...")?);
                let span = q1
                    .iter()
                    .chain(&q2)
                    .flat_map(|s| s.iter())
                    .map(|a| a.index() + 1)
                    .max();
                let n = match (self.n, span) {
                    (Some(n), _) => n,
                    (None, Some(s)) => s,
                    (None, None) => bail!("--n is required for empty custom families"),
                };
                QuorumSystem::explicit(n, q1, q2)?
            }
        };
        Ok(Some(qs))
    }
}

fn parse_family(json: &str) -> Result<Vec<AcceptorSet>> {
    let raw: Vec<Vec<u32>> = serde_json::from_str(json)?;
    raw.into_iter()
        .map(|ids| {
            if let Some(&bad) = ids
                .iter()
                .find(|&&i| i as usize >= fpaxos::quorum::MAX_ACCEPTORS)
            {
                bail!("acceptor index {bad} is too large");
            }
            Ok(ids.into_iter().map(AcceptorId).collect())
        })
        .collect()
}

/// Splits `k=v,k=v,flag` into pairs; bare words get an empty value.
fn fields(spec: &str) -> Vec<(&str, &str)> {
    spec.split(',')
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(|f| f.split_once('=').unwrap_or((f, "")))
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| anyhow!("`{key}` expects a number, got `{v}`"))
}

/// `t=5000,r=2` with an optional `lose` (or `lose=true`) for amnesia.
pub fn parse_crash(spec: &str) -> Result<CrashEvent> {
    let mut t = None;
    let mut r = None;
    let mut lose = false;
    for (k, v) in fields(spec) {
        match k {
            "t" => t = Some(num(k, v)?),
            "r" => r = Some(num(k, v)?),
            "lose" | "lose_memory" => lose = v.is_empty() || num::<bool>(k, v)?,
            other => bail!("unknown crash field `{other}` in `{spec}`"),
        }
    }
    Ok(CrashEvent {
        t_ms: t.with_context(|| format!("`{spec}` lacks t=MS"))?,
        replica: r.with_context(|| format!("`{spec}` lacks r=REPLICA"))?,
        lose_memory: lose,
    })
}

/// `t=10000,r=1`.
pub fn parse_replica_event(spec: &str) -> Result<ReplicaEvent> {
    let mut t = None;
    let mut r = None;
    for (k, v) in fields(spec) {
        match k {
            "t" => t = Some(num(k, v)?),
            "r" => r = Some(num(k, v)?),
            other => bail!("unknown field `{other}` in `{spec}`"),
        }
    }
    Ok(ReplicaEvent {
        t_ms: t.with_context(|| format!("`{spec}` lacks t=MS"))?,
        replica: r.with_context(|| format!("`{spec}` lacks r=REPLICA"))?,
    })
}

/// `t=5000,groups=0+1|2+3+4`, or `t=9000,heal`.
pub fn parse_partition(spec: &str) -> Result<PartitionChange> {
    let mut t = None;
    let mut groups = None;
    for (k, v) in fields(spec) {
        match k {
            "t" => t = Some(num(k, v)?),
            "heal" => groups = Some(Vec::new()),
            "groups" => {
                let parsed = v
                    .split('|')
                    .map(|g| {
                        g.split('+')
                            .map(|r| num::<u32>("groups", r))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                groups = Some(parsed);
            }
            other => bail!("unknown partition field `{other}` in `{spec}`"),
        }
    }
    Ok(PartitionChange {
        t_ms: t.with_context(|| format!("`{spec}` lacks t=MS"))?,
        groups: groups.with_context(|| format!("`{spec}` needs groups=... or heal"))?,
    })
}

/// `fixed:10`, `uniform:1:30` or `heterogeneous:2:40` (milliseconds).
pub fn parse_latency(spec: &str) -> Result<LatencyModel> {
    let parts: Vec<&str> = spec.split(':').collect();
    Ok(match parts.as_slice() {
        ["fixed", ms] => LatencyModel::Fixed {
            ms: num("fixed", ms)?,
        },
        ["uniform", lo, hi] => LatencyModel::Uniform {
            min_ms: num("uniform", lo)?,
            max_ms: num("uniform", hi)?,
        },
        ["heterogeneous", lo, hi] => LatencyModel::Heterogeneous {
            min_ms: num("heterogeneous", lo)?,
            max_ms: num("heterogeneous", hi)?,
        },
        _ => bail!(
            "latency must be fixed:MS, uniform:MIN:MAX or heterogeneous:MIN:MAX, got `{spec}`"
        ),
    })
}

/// `fixed-first`, `rotating`, `seeded:SEED`, `fastest` or `preferred:0+3+1`.
pub fn parse_strategy(spec: &str) -> Result<SimStrategy> {
    Ok(match spec.split_once(':') {
        None => match spec {
            "fixed-first" => SimStrategy::FixedFirst,
            "rotating" => SimStrategy::Rotating,
            "fastest" => SimStrategy::Fastest,
            other => bail!("unknown strategy `{other}`"),
        },
        Some(("seeded", s)) => SimStrategy::Seeded {
            seed: num("seeded", s)?,
        },
        Some(("preferred", order)) => SimStrategy::Preferred {
            order: order
                .split('+')
                .map(|a| num::<u32>("preferred", a).map(AcceptorId))
                .collect::<Result<_>>()?,
        },
        Some(_) => bail!("unknown strategy `{spec}`"),
    })
}

/// A parsed [`parse_list`] value, kept whole so clap treats it as one
/// argument rather than a repeated one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct List(pub Vec<u64>);

pub fn parse_list_arg(spec: &str) -> Result<List> {
    parse_list(spec).map(List)
}

/// Longest list [`parse_list`] will expand.
pub const MAX_LIST_LEN: u64 = 100_000;

/// Comma-separated list, accepting `a..b` (exclusive) and `a..=b` ranges.
pub fn parse_list(spec: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = if let Some((a, b)) = part.split_once("..=") {
            (num::<u64>("range", a)?, Some(num::<u64>("range", b)?))
        } else if let Some((a, b)) = part.split_once("..") {
            let b = num::<u64>("range", b)?;
            (num::<u64>("range", a)?, b.checked_sub(1))
        } else {
            let v = num("list", part)?;
            (v, Some(v))
        };
        let Some(hi) = hi.filter(|&hi| hi >= lo) else {
            continue;
        };
        if hi - lo >= MAX_LIST_LEN - out.len() as u64 {
            bail!("`{spec}` expands to more than {MAX_LIST_LEN} values");
        }
        out.extend(lo..=hi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crash_specs() {
        let c = parse_crash("t=5000,r=2").unwrap();
        assert_eq!((c.t_ms, c.replica, c.lose_memory), (5000, 2, false));
        assert!(parse_crash("t=1,r=0,lose").unwrap().lose_memory);
        assert!(parse_crash("t=1").is_err());
        assert!(parse_crash("t=x,r=1").is_err());
        assert!(parse_crash("t=1,r=1,when=now").is_err());
    }

    #[test]
    fn partition_specs() {
        let p = parse_partition("t=5,groups=0+1|2").unwrap();
        assert_eq!(p.groups, vec![vec![0, 1], vec![2]]);
        assert!(parse_partition("t=9,heal").unwrap().groups.is_empty());
        assert!(parse_partition("t=9").is_err());
    }

    #[test]
    fn latency_and_strategy_specs() {
        assert_eq!(
            parse_latency("fixed:5").unwrap(),
            LatencyModel::Fixed { ms: 5.0 }
        );
        assert!(parse_latency("gaussian:1").is_err());
        assert_eq!(
            parse_strategy("seeded:4").unwrap(),
            SimStrategy::Seeded { seed: 4 }
        );
        assert_eq!(
            parse_strategy("preferred:2+0").unwrap(),
            SimStrategy::Preferred {
                order: vec![AcceptorId(2), AcceptorId(0)]
            }
        );
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("2..=5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_list("0..3,7").unwrap(), vec![0, 1, 2, 7]);
        assert_eq!(parse_list("3..3, 5..=4").unwrap(), Vec::<u64>::new());
        assert!(parse_list("0..=18446744073709551615").is_err());
        assert!(parse_list("1..x").is_err());
    }

    #[test]
    fn quorum_inference() {
        let q = QuorumArgs {
            n: Some(10),
            q2: Some(3),
            ..Default::default()
        };
        assert_eq!(
            q.build().unwrap().unwrap(),
            QuorumSystem::simple(10, 3).unwrap()
        );
        let custom = QuorumArgs {
            n: Some(2),
            custom: Some(vec!["q1=[[0]]".into(), "q2=[[1]]".into()]),
            ..Default::default()
        };
        assert_eq!(custom.build().unwrap().unwrap().n(), 2);
        assert!(QuorumArgs::default().build().unwrap().is_none());
        let bad = QuorumArgs {
            kind: Some(KindArg::Simple),
            n: Some(3),
            q2: Some(4),
            ..Default::default()
        };
        assert!(bad.build().is_err());
    }
}
