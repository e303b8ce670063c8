#![no_main]

use libfuzzer_sys::fuzz_target;

fn round_trip<M>(data: &[u8])
where
    M: serde::de::DeserializeOwned + serde::Serialize + PartialEq + std::fmt::Debug,
{
    if let Ok(m) = serde_json::from_slice::<M>(data) {
        let text = serde_json::to_string(&m).expect("serializes");
        assert_eq!(
            serde_json::from_str::<M>(&text).expect("own output parses"),
            m
        );
    }
}

fuzz_target!(|data: &[u8]| {
    round_trip::<fpaxos::synod::Message>(data);
    round_trip::<fpaxos::multi::Message>(data);
});
