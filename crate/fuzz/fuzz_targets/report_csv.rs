#![no_main]

use gridrisk::report::{parse_line_csv, write_line_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_line_csv(text) {
            let mut buf = Vec::new();
            write_line_csv(&mut buf, &rows).expect("rows that parsed can be written");
        }
    }
});
