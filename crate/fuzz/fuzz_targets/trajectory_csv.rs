#![no_main]

use libfuzzer_sys::fuzz_target;
use nonstat::io::{trajectory_from_csv, trajectory_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(traj) = trajectory_from_csv(text) {
        let csv = trajectory_to_csv(&traj).expect("writable");
        assert_eq!(trajectory_from_csv(&csv).expect("round trip"), traj);
    }
});
