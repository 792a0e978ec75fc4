#![no_main]

use libfuzzer_sys::fuzz_target;
use pingpong_core::linalg::parse_matrix_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_matrix_json(text) {
        assert!(m.dim() > 0);
        let _ = m.op_norm();
    }
});
