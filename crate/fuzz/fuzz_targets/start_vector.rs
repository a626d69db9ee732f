#![no_main]

use gridrisk::report::{parse_start_file, parse_start_vector};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(v) = parse_start_vector(text) {
            assert!(!v.is_empty() && v.iter().all(|x| x.is_finite()));
        }
        let _ = parse_start_file(text);
    }
});
