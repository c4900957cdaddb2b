#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelab::experiments::SweepConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = SweepConfig::from_json(data) {
        let _ = cfg.validate();
        let _ = cfg.advisories();
    }
});
