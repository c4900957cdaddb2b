#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelab::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = io::parse_measure(data) {
        // anything accepted must survive a round trip unchanged
        let text = io::measure_to_json(&m, None).expect("serialize");
        assert_eq!(io::parse_measure(text.as_bytes()).expect("reparse"), m);
    }
});
