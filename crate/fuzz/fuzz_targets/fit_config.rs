#![no_main]

use libfuzzer_sys::fuzz_target;
use nonstat::io::config::{FitPeriodParams, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = RunConfig::<FitPeriodParams>::from_json_str(text);
});
