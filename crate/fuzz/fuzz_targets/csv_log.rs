#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The trajectory-log reader parses files from older runs or foreign
    // tools; it must reject malformed input without panicking.
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(log) = dsmc::csvlog::read_csv(text) {
            // round-trip anything accepted
            let _ = dsmc::csvlog::write_csv(&log);
        }
    }
});
