#![no_main]

use libfuzzer_sys::fuzz_target;
use pingpong_core::projgeom::parse_region_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_region_json(text) {
        assert!(!r.balls().is_empty());
    }
});
