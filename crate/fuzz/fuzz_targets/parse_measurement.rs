#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelab::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = io::parse_measurement(data) {
        assert_eq!(g.samples().len(), 2 * g.n() + 1);
        let text = io::measurement_to_json(&g).expect("serialize");
        assert_eq!(io::parse_measurement(text.as_bytes()).expect("reparse"), g);
    }
});
