#![no_main]

use libfuzzer_sys::fuzz_target;
use nonstat::io::config::{BoundParams, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::<BoundParams>::from_json_str(text) {
        for &x in &config.params.x {
            let _ = config.params.inputs.tail(x);
        }
    }
});
