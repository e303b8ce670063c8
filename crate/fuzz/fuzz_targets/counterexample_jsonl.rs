#![no_main]

use fpaxos::checker::{replay, Counterexample};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cx) = Counterexample::from_jsonl(text) else {
        return;
    };
    assert_eq!(
        Counterexample::from_jsonl(&cx.to_jsonl()).expect("own output parses"),
        cx
    );
    // Replay must reject or accept, never panic.
    let _ = replay(&cx.config, &cx.actions);
});
