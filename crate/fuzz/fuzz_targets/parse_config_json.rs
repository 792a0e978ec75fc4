#![no_main]

use libfuzzer_sys::fuzz_target;
use pingpong_core::pingpong::parse_config_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_config_json(text) {
        // Accepted configs survive a round trip unchanged.
        let back = parse_config_json(&c.to_json()).expect("re-parse");
        assert_eq!(back.to_json(), c.to_json());
    }
});
