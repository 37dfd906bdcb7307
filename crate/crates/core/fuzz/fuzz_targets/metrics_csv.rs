#![no_main]

use libfuzzer_sys::fuzz_target;
use qd_core::io::{format_metrics, parse_metrics};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = parse_metrics(text) {
        assert!(records.iter().all(|r| (0.0..=1.0).contains(&r.coverage)));
        let again = parse_metrics(&format_metrics(&records)).expect("formatted metrics parse");
        assert_eq!(records.len(), again.len());
    }
});
