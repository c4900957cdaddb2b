#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelab::plotdata;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(points) = plotdata::parse(text) {
            let again = plotdata::parse(&plotdata::render("x y", &points)).expect("reparse");
            assert_eq!(again, points);
        }
    }
});
