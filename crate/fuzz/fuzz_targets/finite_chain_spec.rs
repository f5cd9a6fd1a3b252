#![no_main]

use libfuzzer_sys::fuzz_target;
use nonstat::io::config::{Lemma1Params, RunConfig};
use nonstat::martingale::FiniteChain;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = RunConfig::<Lemma1Params>::from_json_str(text);
    if let Ok(chain) = serde_json::from_str::<FiniteChain>(text) {
        let _ = chain.validate();
    }
});
