#![no_main]

use fpaxos_cli::sweep::ExperimentSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<ExperimentSpec>(data) else {
        return;
    };
    if spec.n.len() * spec.q2.len().max(1) * spec.seeds.len().max(1) <= 10_000 {
        let _ = spec.variations();
    }
});
