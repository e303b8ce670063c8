//! Runs the checked-in fuzz corpus through the same parsers the fuzz
//! targets exercise, so seeds stay meaningful without cargo-fuzz.

use std::path::{Path, PathBuf};

use fpaxos::checker::{replay, CheckConfig, Counterexample};
use fpaxos::quorum::QuorumSystem;
use fpaxos::sim::{SimConfig, Trace};
use fpaxos_cli::{args, show, sweep::ExperimentSpec};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).expect("seeds are UTF-8")
}

#[test]
fn quorum_seeds() {
    let mut valid = 0;
    for (path, bytes) in seeds("quorum_json") {
        if let Ok(qs) = serde_json::from_slice::<QuorumSystem>(&bytes) {
            let back: QuorumSystem =
                serde_json::from_str(&serde_json::to_string(&qs).unwrap()).unwrap();
            assert_eq!(back, qs, "{}", path.display());
            valid += 1;
        }
    }
    assert!(valid >= 5);
}

#[test]
fn message_seeds_round_trip() {
    for (path, bytes) in seeds("message_json") {
        let synod = serde_json::from_slice::<fpaxos::synod::Message>(&bytes);
        let multi = serde_json::from_slice::<fpaxos::multi::Message>(&bytes);
        assert!(
            synod.is_ok() || multi.is_ok(),
            "{} parses as neither message type",
            path.display()
        );
        if let Ok(m) = multi {
            let again: fpaxos::multi::Message =
                serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            assert_eq!(again, m);
        }
    }
}

#[test]
fn config_seeds_parse() {
    for (path, bytes) in seeds("check_config_json") {
        CheckConfig::from_json(text(&bytes)).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
    for (path, bytes) in seeds("sim_config_json") {
        SimConfig::from_json(text(&bytes)).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
    for (path, bytes) in seeds("experiment_spec_json") {
        let spec: ExperimentSpec =
            serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        // The second seed deliberately mixes in a disjoint system.
        let _ = spec.variations();
    }
}

#[test]
fn counterexample_seeds_replay() {
    for (path, bytes) in seeds("counterexample_jsonl") {
        let cx = Counterexample::from_jsonl(text(&bytes))
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let r = replay(&cx.config, &cx.actions).unwrap();
        assert!(r.agreement_violated, "{}", path.display());
    }
}

#[test]
fn trace_seeds_parse_and_render() {
    for (path, bytes) in seeds("trace_jsonl") {
        let t = text(&bytes);
        let synod = Trace::<fpaxos::synod::Message>::from_jsonl(t);
        let multi = Trace::<fpaxos::multi::Message>::from_jsonl(t);
        assert!(synod.is_ok() || multi.is_ok(), "{}", path.display());
        assert!(show::render(t).is_ok(), "{}", path.display());
    }
}

#[test]
fn cli_spec_seeds_parse() {
    for (path, bytes) in seeds("cli_specs") {
        let (which, rest) = bytes.split_first().unwrap();
        let spec = text(rest);
        let ok = match which % 6 {
            0 => args::parse_crash(spec).is_ok(),
            1 => args::parse_replica_event(spec).is_ok(),
            2 => args::parse_partition(spec).is_ok(),
            3 => args::parse_latency(spec).is_ok(),
            4 => args::parse_strategy(spec).is_ok(),
            _ => args::parse_list(spec).is_ok(),
        };
        assert!(ok, "{}", path.display());
    }
}
