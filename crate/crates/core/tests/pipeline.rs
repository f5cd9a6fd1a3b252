//! End-to-end paths through the public API.

use nonstat::chain::{simulate, ChainModel};
use nonstat::experiments::{reproduce_simulation_study, StudyConfig};
use nonstat::io::{trajectory_from_csv, trajectory_to_csv};
use nonstat::periodic_ar::{fit_period, FitSettings, LossSpec, PredictorClass};

#[test]
fn simulated_csv_round_trip_then_fit_selects_the_true_period() {
    let model = ChainModel::gaussian_ar1(vec![0.8, 0.5, 0.9, -0.7], 1.0, 1.0);
    let traj = simulate(&model, 400, 1, 0).unwrap();
    let back = trajectory_from_csv(&trajectory_to_csv(&traj).unwrap()).unwrap();
    // the CSV carries states only
    assert_eq!((back.dim, &back.states), (traj.dim, &traj.states));
    let settings = FitSettings {
        epsilon: Some(1.0 / 400.0),
        ..FitSettings::new(20, PredictorClass::ScalarAr1 { rho_max: 0.9 }, LossSpec::Absolute)
    };
    let report = fit_period(&back, &settings).unwrap();
    assert_eq!(report.selected_t_slope(), 4);
    // same trajectory and settings as the study with seed 1
    let study = reproduce_simulation_study(&StudyConfig::with_seed(1)).unwrap();
    assert_eq!(study.report.risks(), report.risks());
}

#[test]
fn study_writes_its_files() {
    let dir = std::env::temp_dir().join(format!("nonstat-pipeline-{}", std::process::id()));
    let out = reproduce_simulation_study(&StudyConfig { t_max: 5, ..StudyConfig::with_seed(4) }).unwrap();
    out.write_to(&dir).unwrap();
    for name in ["trajectory.csv", "acf.csv", "risk.csv", "slope.csv", "summary.json"] {
        assert!(dir.join(name).is_file(), "{name}");
    }
    assert_eq!(std::fs::read_to_string(dir.join("risk.csv")).unwrap(), out.risk_csv);
    std::fs::remove_dir_all(&dir).unwrap();
}
