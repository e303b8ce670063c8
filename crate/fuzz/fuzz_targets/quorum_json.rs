#![no_main]

use fpaxos::quorum::{Phase, QuorumSystem};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(qs) = serde_json::from_slice::<QuorumSystem>(data) else {
        return;
    };
    let text = serde_json::to_string(&qs).expect("serializes");
    let back: QuorumSystem = serde_json::from_str(&text).expect("own output parses");
    assert_eq!(back, qs);
    let _ = qs.validate_cross_intersection();
    for phase in [Phase::One, Phase::Two] {
        if let Some(k) = qs.min_quorum_size(phase) {
            assert!(k >= 1 && k <= qs.n());
        }
    }
    if qs.n() <= 10 {
        let _ = qs.failure_tolerance();
    }
});
