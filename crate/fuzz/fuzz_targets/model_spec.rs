#![no_main]

use libfuzzer_sys::fuzz_target;
use nonstat::chain::ChainModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ChainModel::from_json_str(text) {
        // a validated model must survive a round trip
        let json = serde_json::to_string(&model).expect("serialisable");
        ChainModel::from_json_str(&json).expect("round trip");
    }
});
