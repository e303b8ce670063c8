#![no_main]

use fpaxos_cli::args;
use libfuzzer_sys::fuzz_target;

// The first byte picks the flag parser; the rest is the flag value.
fuzz_target!(|data: &[u8]| {
    let Some((&which, rest)) = data.split_first() else {
        return;
    };
    let Ok(spec) = std::str::from_utf8(rest) else {
        return;
    };
    match which % 6 {
        0 => drop(args::parse_crash(spec)),
        1 => drop(args::parse_replica_event(spec)),
        2 => drop(args::parse_partition(spec)),
        3 => drop(args::parse_latency(spec)),
        4 => drop(args::parse_strategy(spec)),
        _ => {
            if let Ok(v) = args::parse_list(spec) {
                assert!(v.len() as u64 <= args::MAX_LIST_LEN);
            }
        }
    }
});
