#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Trajectory profile expressions come straight from config files.
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(profile) = dsmc::profile::Profile::parse(text) {
            // sampling an accepted profile must stay total
            let _ = profile.sample(0.0);
            let _ = profile.sample(1e6);
            let _ = profile.shortest_feature();
        }
    }
});
