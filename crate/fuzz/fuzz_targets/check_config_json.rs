#![no_main]

use fpaxos::checker::CheckConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = CheckConfig::from_json(text) else {
        return;
    };
    let again = CheckConfig::from_json(&serde_json::to_string(&cfg).expect("serializes"))
        .expect("own output parses");
    assert_eq!(again, cfg);
});
