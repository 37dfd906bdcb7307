#![no_main]

use libfuzzer_sys::fuzz_target;
use qd_core::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ExperimentConfig::from_text(text) {
        // Serialising and re-parsing an accepted config must give it back.
        let again = ExperimentConfig::from_text(&config.to_text()).expect("round trip parses");
        assert_eq!(config, again);
        let _ = config.validate();
    }
});
