#![no_main]

use libfuzzer_sys::fuzz_target;
use pingpong_core::words::parse_word_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(w) = parse_word_json(text) {
        assert!(w.is_reduced());
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(parse_word_json(&json).unwrap(), w);
    }
});
