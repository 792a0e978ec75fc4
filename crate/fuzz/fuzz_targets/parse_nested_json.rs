#![no_main]

use libfuzzer_sys::fuzz_target;
use pingpong_core::experiment::parse_nested_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_nested_json(text);
});
