#![no_main]

use fpaxos::sim::Trace;
use libfuzzer_sys::fuzz_target;

fn round_trip<M>(text: &str)
where
    M: serde::de::DeserializeOwned + serde::Serialize + PartialEq + std::fmt::Debug,
{
    if let Ok(t) = Trace::<M>::from_jsonl(text) {
        assert_eq!(
            Trace::<M>::from_jsonl(&t.to_jsonl()).expect("own output parses"),
            t
        );
    }
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    round_trip::<fpaxos::synod::Message>(text);
    round_trip::<fpaxos::multi::Message>(text);
    let _ = fpaxos_cli::show::render(text);
});
