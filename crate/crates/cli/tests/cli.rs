//! End-to-end runs of the `fpaxos` binary: exit codes, golden outputs and
//! config-file equivalence with flags.

mod common;

use std::process::Command;

use common::{check_golden, fpaxos, read};
use tempfile::TempDir;

fn golden(name: &str, actual: &str) {
    if let Err(e) = check_golden(name, actual) {
        panic!("{e}");
    }
}

fn tmp() -> TempDir {
    tempfile::tempdir().expect("temp dir")
}

#[test]
fn analyze_tables() {
    let d = tmp();
    let cases: [(&str, &[&str]); 4] = [
        (
            "analyze_simple_10_3.txt",
            &[
                "quorum", "analyze", "--kind", "simple", "--n", "10", "--q2", "3",
            ],
        ),
        (
            "analyze_improved_4.txt",
            &["quorum", "analyze", "--n", "4", "--improved"],
        ),
        (
            "analyze_grid_fpaxos_4x5.txt",
            &[
                "quorum", "analyze", "--kind", "grid", "--rows", "4", "--cols", "5", "--mode",
                "fpaxos",
            ],
        ),
        (
            "analyze_grid_paxos_4x5.json",
            &[
                "quorum", "analyze", "--rows", "4", "--cols", "5", "--mode", "paxos", "--json",
            ],
        ),
    ];
    for (name, args) in cases {
        let out = fpaxos(d.path(), args);
        assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
        golden(name, &out.stdout);
    }
}

#[test]
fn analyze_json_is_parseable() {
    let out = fpaxos(
        tmp().path(),
        &[
            "quorum", "analyze", "--kind", "simple", "--n", "10", "--q2", "3", "--json",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["q1"], 8);
    assert_eq!(v["tolerance"]["guaranteed_f"], 2);
    assert_eq!(v["intersection"]["result"], "holds", "{v}");
}

#[test]
fn analyze_exit_codes() {
    let d = tmp();
    let bad = fpaxos(
        d.path(),
        &[
            "quorum", "analyze", "--kind", "simple", "--n", "3", "--q2", "4",
        ],
    );
    assert_eq!(bad.code, 2);
    assert!(bad.stderr.starts_with("error: "), "{}", bad.stderr);
    assert!(bad.stdout.is_empty());

    let disjoint = fpaxos(
        d.path(),
        &["quorum", "analyze", "--custom", "q1=[[0]]", "q2=[[1]]"],
    );
    assert_eq!(disjoint.code, 1);
    assert!(disjoint.stdout.contains("violated"), "{}", disjoint.stdout);

    assert_eq!(
        fpaxos(d.path(), &["quorum", "analyze"]).code,
        2,
        "no system described"
    );
    assert_eq!(
        fpaxos(d.path(), &["quorum", "analyze", "--bogus"]).code,
        2,
        "unknown flag"
    );
    assert_eq!(fpaxos(d.path(), &[]).code, 2, "missing subcommand");
    assert_eq!(
        fpaxos(d.path(), &["quorum", "analyze", "--rows", "2"]).code,
        2,
        "grid without --cols"
    );
    assert_eq!(
        fpaxos(
            d.path(),
            &["quorum", "analyze", "--rows", "2", "--cols", "2", "--n", "5"]
        )
        .code,
        2
    );
}

#[test]
fn check_safe_systems() {
    let d = tmp();
    let out = fpaxos(
        d.path(),
        &[
            "check",
            "--n",
            "3",
            "--kind",
            "majority",
            "--ballots",
            "2",
            "--values",
            "2",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    golden("check_majority_3.txt", &out.stdout);
    assert!(!d.path().join("counterexample.jsonl").exists());

    let out = fpaxos(
        d.path(),
        &[
            "check",
            "--n",
            "4",
            "--kind",
            "majority",
            "--improved",
            "--ballots",
            "2",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("20609 states"), "{}", out.stdout);
}

#[test]
fn check_disjoint_writes_a_replayable_counterexample() {
    let d = tmp();
    let out = fpaxos(
        d.path(),
        &["check", "--custom", "q1=[[0]]", "q2=[[1]]", "--n", "2"],
    );
    assert_eq!(out.code, 1, "{}", out.stderr);
    golden("check_disjoint.txt", &out.stdout);
    let cx = read(d.path().join("counterexample.jsonl"));
    golden("counterexample_disjoint.jsonl", &cx);

    let replay = fpaxos(
        d.path(),
        &["replay", "counterexample.jsonl", "--trace", "replay.jsonl"],
    );
    assert_eq!(
        replay.code, 1,
        "replay confirms the violation: {}",
        replay.stderr
    );
    golden("replay_disjoint.txt", &replay.stdout);
    assert!(!read(d.path().join("replay.jsonl")).is_empty());

    let show = fpaxos(d.path(), &["show", "counterexample.jsonl"]);
    assert_eq!(show.code, 0, "{}", show.stderr);
    golden("show_counterexample.txt", &show.stdout);
    let show = fpaxos(d.path(), &["show", "replay.jsonl"]);
    assert_eq!(show.code, 0, "{}", show.stderr);
}

#[test]
fn replay_of_a_tampered_counterexample_is_an_error() {
    let d = tmp();
    assert_eq!(
        fpaxos(d.path(), &["check", "--custom", "q1=[[0]]", "q2=[[1]]"]).code,
        1
    );
    let cx = read(d.path().join("counterexample.jsonl"));
    // Drop the first prepare so later promises are no longer enabled.
    let tampered: Vec<&str> = cx
        .lines()
        .enumerate()
        .filter(|(i, _)| *i != 1)
        .map(|(_, l)| l)
        .collect();
    std::fs::write(d.path().join("bad.jsonl"), tampered.join("\n") + "\n").unwrap();
    let out = fpaxos(d.path(), &["replay", "bad.jsonl"]);
    assert_eq!(out.code, 2, "{}", out.stdout);
    assert_eq!(fpaxos(d.path(), &["replay", "missing.jsonl"]).code, 2);
}

#[test]
fn check_config_file_matches_flags() {
    let d = tmp();
    let cfg = r#"{"quorum": {"kind": "simple", "n": 4, "q2_size": 2}, "ballots": 2, "values": 2}"#;
    std::fs::write(d.path().join("check.json"), cfg).unwrap();
    let from_file = fpaxos(d.path(), &["check", "--config", "check.json"]);
    let from_flags = fpaxos(
        d.path(),
        &[
            "check",
            "--kind",
            "simple",
            "--n",
            "4",
            "--q2",
            "2",
            "--ballots",
            "2",
        ],
    );
    assert_eq!(from_file.code, 0, "{}", from_file.stderr);
    assert_eq!(from_file.stdout, from_flags.stdout);

    std::fs::write(
        d.path().join("bad.json"),
        r#"{"quorum": {"kind": "majority", "n": 3}, "ballots": 9}"#,
    )
    .unwrap();
    assert_eq!(fpaxos(d.path(), &["check", "--config", "bad.json"]).code, 2);
}

#[test]
fn check_amnesia_finds_a_violation() {
    let d = tmp();
    let out = fpaxos(
        d.path(),
        &[
            "check",
            "--n",
            "3",
            "--amnesia",
            "1",
            "--property",
            "agreement",
            "--stop-at-first",
        ],
    );
    assert_eq!(out.code, 1, "{}", out.stderr);
    let replay = fpaxos(d.path(), &["replay", "counterexample.jsonl"]);
    assert_eq!(replay.code, 1, "{}", replay.stdout);
}

#[test]
fn check_sweep_agrees_with_intersection() {
    let out = fpaxos(tmp().path(), &["check", "--sweep", "3"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    golden("check_sweep_3.txt", &out.stdout);
}

#[test]
fn scenarios_reproduce_golden_traces() {
    let d = tmp();
    let core_golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    for name in ["fig2a", "fig2b"] {
        let file = format!("{name}.jsonl");
        let out = fpaxos(
            d.path(),
            &["simulate", "--scenario", name, "--trace", &file],
        );
        assert_eq!(out.code, 0, "{}", out.stderr);
        golden(&format!("simulate_{name}.txt"), &out.stdout);
        assert_eq!(
            read(d.path().join(&file)),
            read(core_golden.join(&file)),
            "{name} trace"
        );
    }
}

fn small_run() -> Vec<&'static str> {
    vec![
        "simulate",
        "--kind",
        "simple",
        "--n",
        "5",
        "--q2",
        "2",
        "--duration-ms",
        "3000",
        "--warmup-ms",
        "500",
        "--cooldown-ms",
        "500",
        "--latency",
        "uniform:2:20",
        "--seed",
        "3",
    ]
}

#[test]
fn simulate_outputs() {
    let d = tmp();
    let mut args = small_run();
    args.extend([
        "--trace",
        "t.jsonl",
        "--metrics",
        "m.json",
        "--commits",
        "c.csv",
    ]);
    let out = fpaxos(d.path(), &args);
    assert_eq!(out.code, 0, "{}", out.stderr);
    golden("simulate_simple_5_2.txt", &out.stdout);

    let metrics: serde_json::Value = serde_json::from_str(&read(d.path().join("m.json"))).unwrap();
    let commits = read(d.path().join("c.csv"));
    let mut lines = commits.lines();
    assert_eq!(lines.next(), Some("t_us,latency_us,id,slot"));
    assert!(lines.count() as u64 >= metrics["commits_in_window"].as_u64().unwrap());
    assert!(read(d.path().join("t.jsonl")).lines().count() > 100);

    let json = fpaxos(d.path(), &[small_run(), vec!["--json"]].concat());
    let printed: serde_json::Value = serde_json::from_str(&json.stdout).unwrap();
    assert_eq!(printed, metrics);

    let show = fpaxos(d.path(), &["show", "t.jsonl"]);
    assert_eq!(show.code, 0, "{}", show.stderr);
    assert!(show.stdout.lines().count() > 100);
}

#[test]
fn simulate_config_file_matches_flags() {
    let d = tmp();
    let cfg = serde_json::json!({
        "quorum": {"kind": "simple", "n": 5, "q2_size": 2},
        "seed": 3,
        "latency": {"model": "uniform", "min_ms": 2.0, "max_ms": 20.0},
        "duration_ms": 3000,
        "warmup_ms": 500,
        "cooldown_ms": 500,
    });
    std::fs::write(d.path().join("sim.json"), cfg.to_string()).unwrap();
    let from_file = fpaxos(d.path(), &["simulate", "--config", "sim.json"]);
    let from_flags = fpaxos(d.path(), &small_run());
    assert_eq!(from_file.code, 0, "{}", from_file.stderr);
    assert_eq!(from_file.stdout, from_flags.stdout);

    std::fs::write(d.path().join("bad.json"), r#"{"loss": 2.0}"#).unwrap();
    assert_eq!(
        fpaxos(d.path(), &["simulate", "--config", "bad.json"]).code,
        2
    );
    std::fs::write(d.path().join("typo.json"), r#"{"seeed": 1}"#).unwrap();
    assert_eq!(
        fpaxos(d.path(), &["simulate", "--config", "typo.json"]).code,
        2
    );
}

#[test]
fn seed_comes_from_the_environment_by_default() {
    let d = tmp();
    let base = [
        "simulate",
        "--n",
        "3",
        "--duration-ms",
        "2000",
        "--warmup-ms",
        "0",
        "--cooldown-ms",
        "0",
    ];
    let lat = ["--latency", "uniform:1:30"];
    let run_env = |seed: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_fpaxos"))
            .args(base)
            .args(lat)
            .current_dir(d.path())
            .env("FPAXOS_SEED", seed)
            .output()
            .unwrap();
        (out.status.code(), String::from_utf8(out.stdout).unwrap())
    };
    let explicit = fpaxos(d.path(), &[&base[..], &lat[..], &["--seed", "7"]].concat());
    assert_eq!(run_env("7"), (Some(0), explicit.stdout.clone()));
    let zero = fpaxos(d.path(), &[&base[..], &lat[..]].concat());
    assert_ne!(zero.stdout, explicit.stdout, "the seed changes the run");
    assert_eq!(run_env("seven").0, Some(2));
}

#[test]
fn simulate_flags_drive_crashes_and_elections() {
    let d = tmp();
    let out = fpaxos(
        d.path(),
        &[
            "simulate",
            "--n",
            "4",
            "--kind",
            "majority",
            "--improved",
            "--crash",
            "t=5000,r=2",
            "--crash",
            "t=5000,r=3",
            "--duration-ms",
            "20000",
            "--warmup-ms",
            "1000",
            "--cooldown-ms",
            "1000",
            "--commits",
            "c.csv",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let after = read(d.path().join("c.csv"))
        .lines()
        .skip(1)
        .filter(|l| l.split(',').next().unwrap().parse::<u64>().unwrap() > 6_000_000)
        .count();
    assert!(after > 0, "commits continue after both crashes");
}

#[test]
fn simulate_safety_violation_exits_one() {
    let d = tmp();
    let out = fpaxos(
        d.path(),
        &[
            "simulate",
            "--n",
            "3",
            "--crash",
            "t=2000,r=0",
            "--crash",
            "t=2000,r=1,lose",
            "--restore",
            "t=2001,r=1",
            "--elect",
            "t=2002,r=2",
            "--duration-ms",
            "5000",
            "--warmup-ms",
            "0",
            "--cooldown-ms",
            "0",
            "--trace",
            "v.jsonl",
        ],
    );
    assert_eq!(out.code, 1, "{}", out.stdout);
    assert!(out.stderr.contains("safety violation"), "{}", out.stderr);
    assert!(!read(d.path().join("v.jsonl")).is_empty());
}

#[test]
fn simulate_rejects_bad_flags() {
    let d = tmp();
    for args in [
        &["simulate", "--loss", "1.5"][..],
        &["simulate", "--crash", "t=5,r=9"],
        &["simulate", "--crash", "r=1"],
        &["simulate", "--latency", "gaussian:3"],
        &["simulate", "--strategy", "random"],
        &["simulate", "--leader", "0", "--no-leader"],
        &["simulate", "--scenario", "fig3"],
    ] {
        assert_eq!(fpaxos(d.path(), args).code, 2, "{args:?}");
    }
}

#[test]
fn sweep_csv_and_json() {
    let d = tmp();
    let args = [
        "sweep",
        "--n",
        "5",
        "--q2",
        "2..=3",
        "--seeds",
        "0..2",
        "--duration-ms",
        "3000",
        "--warmup-ms",
        "500",
        "--cooldown-ms",
        "500",
        "--latency",
        "uniform:2:20",
    ];
    let out = fpaxos(d.path(), &args);
    assert_eq!(out.code, 0, "{}", out.stderr);
    golden("sweep_simple_5.csv", &out.stdout);

    let out = fpaxos(
        d.path(),
        &[&args[..], &["--format", "json", "--out", "s.json"]].concat(),
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&read(d.path().join("s.json"))).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[2]["q2"], 3);
    assert_eq!(rows[2]["seed"], 0);
}

#[test]
fn sweep_spec_file() {
    let d = tmp();
    let spec = serde_json::json!({
        "base": {"duration_ms": 3000, "warmup_ms": 500, "cooldown_ms": 500, "latency": {"model": "uniform", "min_ms": 2.0, "max_ms": 20.0}},
        "n": [5],
        "kind": "simple",
        "q2": [2, 3],
        "seeds": [0, 1],
        "output": "out.csv",
    });
    std::fs::write(d.path().join("spec.json"), spec.to_string()).unwrap();
    let out = fpaxos(d.path(), &["sweep", "--spec", "spec.json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.is_empty());
    check_golden("sweep_simple_5.csv", &read(d.path().join("out.csv"))).unwrap();

    let disjoint = serde_json::json!({
        "quorums": [
            {"kind": "simple", "n": 3, "q2_size": 2},
            {"kind": "explicit", "n": 2, "q1": [[0]], "q2": [[1]]},
        ],
    });
    std::fs::write(d.path().join("disjoint.json"), disjoint.to_string()).unwrap();
    let out = fpaxos(d.path(), &["sweep", "--spec", "disjoint.json"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("disjoint"), "{}", out.stderr);
    assert!(out.stdout.is_empty(), "nothing runs before validation");
}
