use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{simulate, ChainModel, InitSpec, NoiseSpec, Trajectory};
use crate::error::{invalid, Result};
use crate::io::{csv_string, fmt_real, trajectory_to_csv, write_output};
use crate::periodic_ar::{fit_period, Breakpoint, CGrid, FitReport, FitSettings, LossSpec, PredictorClass};

fn default_n() -> usize {
    400
}
fn default_coeffs() -> Vec<f64> {
    vec![0.8, 0.5, 0.9, -0.7]
}
fn default_law() -> NoiseSpec {
    NoiseSpec::gaussian(1.0, 1)
}
fn default_t_max() -> usize {
    20
}
fn default_rho_max() -> f64 {
    0.9
}
fn default_loss() -> LossSpec {
    LossSpec::Absolute
}
fn default_max_lag() -> usize {
    40
}

/// The periodic AR(1) study: period-4 coefficients, Gaussian noise, ERM over
/// scalar AR(1) predictors for every `T ≤ t_max`, slope-heuristic selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_coeffs")]
    pub coeffs: Vec<f64>,
    #[serde(default = "default_law")]
    pub noise: NoiseSpec,
    #[serde(default = "default_law")]
    pub init: InitSpec,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    #[serde(default = "default_loss")]
    pub loss: LossSpec,
    /// Net resolution; defaults to `1/n`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_max_lag")]
    pub acf_max_lag: usize,
    #[serde(default)]
    pub c_grid: Option<CGrid>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 0,
            n: default_n(),
            coeffs: default_coeffs(),
            noise: default_law(),
            init: default_law(),
            t_max: default_t_max(),
            rho_max: default_rho_max(),
            loss: default_loss(),
            epsilon: None,
            acf_max_lag: default_max_lag(),
            c_grid: None,
        }
    }
}

impl StudyConfig {
    pub fn with_seed(seed: u64) -> Self {
        StudyConfig { seed, ..Self::default() }
    }

    pub fn model(&self) -> Result<ChainModel> {
        let mut model = ChainModel::gaussian_ar1(self.coeffs.clone(), 1.0, 1.0);
        model.id = "periodic_ar1".into();
        model.noise = self.noise.clone();
        model.init = self.init.clone();
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySummary {
    pub seed: u64,
    pub n: usize,
    pub t_max: usize,
    pub epsilon: f64,
    pub net_cardinality: usize,
    pub risks: Vec<f64>,
    pub c_hat: f64,
    pub jump: f64,
    /// `T̂(2ĉ)`
    pub selected_t: usize,
    pub selected_t_penalized: usize,
    pub c1: f64,
    pub breakpoints: Vec<Breakpoint>,
    /// `c` where `T̂` switches to 4, if it does.
    pub c_into_4: Option<f64>,
    /// `c` where `T̂` leaves 4, if it does.
    pub c_out_of_4: Option<f64>,
    /// `r(4) < r(T)` for `T ∈ {1, 2, 3}`.
    pub t4_beats_smaller: bool,
    pub params_at_selected: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutput {
    pub summary: StudySummary,
    pub report: FitReport,
    pub trajectory_csv: String,
    pub acf_csv: String,
    pub risk_csv: String,
    pub slope_csv: String,
}

impl StudyOutput {
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)? + "\n")
    }

    /// Writes `trajectory.csv`, `acf.csv`, `risk.csv`, `slope.csv` and
    /// `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        write_output(dir, "trajectory.csv", &self.trajectory_csv)?;
        write_output(dir, "acf.csv", &self.acf_csv)?;
        write_output(dir, "risk.csv", &self.risk_csv)?;
        write_output(dir, "slope.csv", &self.slope_csv)?;
        write_output(dir, "summary.json", &self.summary_json()?)
    }
}

/// Sample autocorrelation of a scalar series at lags `0..=max_lag`.
pub fn acf(xs: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = xs.len();
    if n < 2 || max_lag >= n {
        return invalid!("acf needs max_lag < len and at least 2 points, got len {n}, max_lag {max_lag}");
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    if c0 == 0.0 {
        return invalid!("acf of a constant series is undefined");
    }
    Ok((0..=max_lag)
        .map(|h| (0..n - h).map(|t| (xs[t] - mean) * (xs[t + h] - mean)).sum::<f64>() / c0)
        .collect())
}

/// Simulates one trajectory and runs period selection on it.
pub fn reproduce_simulation_study(config: &StudyConfig) -> Result<StudyOutput> {
    let model = config.model()?;
    if model.dimension() != 1 {
        return invalid!("the study uses scalar noise and initial laws");
    }
    let traj = simulate(&model, config.n, config.seed, 0)?;
    run_on_trajectory(config, &traj)
}

fn run_on_trajectory(config: &StudyConfig, traj: &Trajectory) -> Result<StudyOutput> {
    let settings = FitSettings {
        epsilon: Some(config.epsilon.unwrap_or(1.0 / config.n as f64)),
        c_grid: config.c_grid,
        ..FitSettings::new(config.t_max, PredictorClass::ScalarAr1 { rho_max: config.rho_max }, config.loss.clone())
    };
    let report = fit_period(traj, &settings)?;
    let risks = report.risks();
    let max_lag = config.acf_max_lag.min(traj.len().saturating_sub(1));
    let acf_csv = match acf(&traj.states, max_lag) {
        Ok(values) => csv_string(
            &["lag", "acf"],
            values.iter().enumerate().map(|(h, v)| vec![h.to_string(), fmt_real(*v)]),
        )?,
        Err(_) => csv_string(&["lag", "acf"], std::iter::empty::<Vec<String>>())?,
    };
    let risk_csv = csv_string(
        &["T", "risk", "penalty", "objective"],
        report.per_t.iter().map(|p| vec![p.t.to_string(), fmt_real(p.risk), fmt_real(p.penalty), fmt_real(p.objective)]),
    )?;
    let slope_csv = csv_string(
        &["c", "t_hat"],
        report.slope.trace.iter().map(|(c, t)| vec![fmt_real(*c), t.to_string()]),
    )?;
    let bps = report.slope.breakpoints.clone();
    let t4_beats_smaller = risks.len() >= 4 && risks[..3].iter().all(|&r| risks[3] < r);
    let selected = report.selected_t_slope();
    let summary = StudySummary {
        seed: config.seed,
        n: report.n,
        t_max: report.t_max,
        epsilon: report.epsilon,
        net_cardinality: report.net_cardinality,
        risks,
        c_hat: report.c_hat(),
        jump: report.slope.jump,
        selected_t: selected,
        selected_t_penalized: report.selected_t_penalized,
        c1: report.c1,
        c_into_4: bps.iter().find(|b| b.to_t == 4).map(|b| b.c),
        c_out_of_4: bps.iter().find(|b| b.from_t == 4).map(|b| b.c),
        breakpoints: bps,
        t4_beats_smaller,
        params_at_selected: report.per_t[selected - 1].params.clone(),
    };
    Ok(StudyOutput { summary, report, trajectory_csv: trajectory_to_csv(traj)?, acf_csv, risk_csv, slope_csv })
}
