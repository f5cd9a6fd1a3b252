//! Monte Carlo checks of the tail bounds, the moment bound, the risk
//! stationarity bound, and the periodic AR simulation study.

pub mod moments;
pub mod risk;
pub mod study;
pub mod tail;

pub use moments::{check_moment_lemma, MomentReport, MomentRow};
pub use risk::{check_risk_stationarity, PhaseMomentRow, RiskCheck, StationarityReport};
pub use study::{acf, reproduce_simulation_study, StudyConfig, StudyOutput, StudySummary};
pub use tail::{
    fit_bound_inputs, quantile_grid, run_tail_experiment, BoundFamily, BoundInputs, TailExperiment, TailFunctional,
    TailRow, ValidationReport, MIN_REPLICATES,
};

/// Margin, in standard errors, for every Monte Carlo comparison.
pub const SIGMA_MARGIN: f64 = 3.0;

/// `sqrt(p(1 − p)/r)`.
pub(crate) fn bernoulli_stderr(p: f64, r: u64) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}
