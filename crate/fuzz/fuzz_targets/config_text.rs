#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The experiment config parser must never panic on arbitrary text.
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = dsmc::config::parse_config_str(text);
    }
});
