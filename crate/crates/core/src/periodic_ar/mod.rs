//! Periodic autoregressive prediction: Lipschitz losses, covering nets of
//! linear predictors, exact ERM over nets, and period selection.

mod class;
mod erm;
mod loss;
mod selection;

pub use class::{build_net, build_net_with_cap, entropy, CoveringNet, PredictorClass, DEFAULT_NET_CAP};
pub use erm::{empirical_risk, erm_fit, phase_index, ErmFit};
pub use loss::LossSpec;
pub use selection::{
    breakpoints, default_net, fit_all_periods, fit_period, required_sample_size, risk_constants,
    risk_constants_from, sample_size_ok, select_period_penalized, slope_heuristic, t_hat, Breakpoint, CGrid,
    FitReport, FitSettings, PenaltyChoice, PeriodFit, RiskConstants, SlopeResult,
};
