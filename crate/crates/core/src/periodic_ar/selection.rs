use serde::{Deserialize, Serialize};

use super::class::{build_net, build_net_with_cap, entropy, CoveringNet, PredictorClass, DEFAULT_NET_CAP};
use super::erm::{erm_fit, ErmFit};
use super::loss::LossSpec;
use crate::chain::{ChainModel, Trajectory};
use crate::concentration::BernsteinInputs;
use crate::error::{finite, invalid, Result};

/// Constants of the risk bounds for periodic predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConstants {
    /// `L(1+ρ)[G_ε(0)/(1−ρ) + G_{X₁}(0)]`
    pub c0: f64,
    /// `4(1+ρ)L√𝒱`
    pub c1: f64,
    /// `2(1+ρ)L√𝒱 + 2δ`
    pub c2: f64,
    /// `3[G_ε(0) + G_{X₁}(0)]/(1−ρ) + 𝒱/(2δ)`; `None` when `δ = 0`, where
    /// it diverges.
    pub c3: Option<f64>,
    /// `𝒱 = V_(n)/(n−1)`
    pub v_script: f64,
    pub delta: f64,
}

/// Evaluates the constants from their ingredients.
pub fn risk_constants_from(l: f64, g_eps0: f64, g_x10: f64, inputs: &BernsteinInputs) -> Result<RiskConstants> {
    inputs.validate()?;
    if inputs.n < 2 {
        return invalid!("risk constants need n >= 2, got {}", inputs.n);
    }
    for (name, v) in [("L", l), ("G_eps(0)", g_eps0), ("G_X1(0)", g_x10)] {
        if !(finite(name, v)? >= 0.0) {
            return invalid!("{name} must be >= 0, got {v}");
        }
    }
    let rho = inputs.rho;
    let v = inputs.v_n() / (inputs.n - 1) as f64;
    let delta = inputs.delta();
    let sv = v.sqrt();
    let c3 = (delta > 0.0).then(|| 3.0 * (g_eps0 + g_x10) / (1.0 - rho) + v / (2.0 * delta));
    Ok(RiskConstants {
        c0: l * (1.0 + rho) * (g_eps0 / (1.0 - rho) + g_x10),
        c1: 4.0 * (1.0 + rho) * l * sv,
        c2: 2.0 * (1.0 + rho) * l * sv + 2.0 * delta,
        c3,
        v_script: v,
        delta,
    })
}

/// [`risk_constants_from`] with `G_ε(0)`, `G_{X₁}(0)` taken from `model`.
pub fn risk_constants(model: &ChainModel, loss: &LossSpec, inputs: &BernsteinInputs) -> Result<RiskConstants> {
    model.validate()?;
    if !model.is_additive() {
        return invalid!("risk constants need an additive-noise model");
    }
    loss.validate()?;
    let zero = vec![0.0; model.dimension()];
    risk_constants_from(loss.lipschitz(), model.g_eps(&zero)?, model.g_x1(&zero)?, inputs)
}

/// `n ≥ 1 + 4δ²T·H(F, 1/(Ln))/𝒱`, with `V_(n)` evaluated at this `n`.
pub fn sample_size_ok(
    n: usize,
    t_period: usize,
    class: &PredictorClass,
    loss: &LossSpec,
    inputs: &BernsteinInputs,
) -> Result<bool> {
    Ok(n as f64 >= required_sample_size(n, t_period, class, loss, inputs)?)
}

/// Right-hand side of the sample-size condition (`+∞` when `𝒱 = 0 < δ`).
pub fn required_sample_size(
    n: usize,
    t_period: usize,
    class: &PredictorClass,
    loss: &LossSpec,
    inputs: &BernsteinInputs,
) -> Result<f64> {
    if n < 2 {
        return invalid!("n must be >= 2, got {n}");
    }
    loss.validate()?;
    let at_n = BernsteinInputs { n, ..*inputs };
    at_n.validate()?;
    let delta = at_n.delta();
    if delta == 0.0 {
        return Ok(1.0);
    }
    let v = at_n.v_n() / (n - 1) as f64;
    if v == 0.0 {
        return Ok(f64::INFINITY);
    }
    let h = entropy(class, 1.0 / (loss.lipschitz() * n as f64))?;
    Ok(1.0 + 4.0 * delta * delta * t_period as f64 * h / v)
}

/// Slope-heuristic grid `c_min, c_min + step, …, c_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CGrid {
    pub c_min: f64,
    pub c_max: f64,
    pub step: f64,
}

impl CGrid {
    /// `[0, 2·spread]` in 400 cells, `spread = max r − min r` (1 if flat).
    pub fn default_for(risks: &[f64]) -> Self {
        let hi = risks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = risks.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = if hi > lo { hi - lo } else { 0.5 };
        let c_max = 2.0 * spread;
        CGrid { c_min: 0.0, c_max, step: c_max / 400.0 }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let ok = finite("c_min", self.c_min)? >= 0.0
            && finite("c_max", self.c_max)? >= self.c_min
            && finite("step", self.step)? > 0.0;
        if !ok {
            return invalid!("c grid needs 0 <= c_min <= c_max and step > 0, got {self:?}");
        }
        let cells = ((self.c_max - self.c_min) / self.step + 1e-9).floor() as usize;
        if cells == 0 {
            return invalid!("c grid {self:?} has no cells");
        }
        if cells > 10_000_000 {
            return invalid!("c grid {self:?} has too many cells");
        }
        Ok((0..=cells).map(|k| self.c_min + k as f64 * self.step).collect())
    }
}

/// `argmin_T [r(T) + c√T]` over `T = 1..=len`, ties toward smaller `T`.
pub fn t_hat(risks: &[f64], c: f64) -> usize {
    let mut best = (1, risks[0] + c);
    for (i, &r) in risks.iter().enumerate().skip(1) {
        let t = i + 1;
        let v = r + c * (t as f64).sqrt();
        if v < best.1 {
            best = (t, v);
        }
    }
    best.0
}

/// A value of `c` where `T̂(c)` switches from `from_t` to `to_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub c: f64,
    pub from_t: usize,
    pub to_t: usize,
}

/// Exact switch points of `T̂(c)` for `c > 0`: the vertices of the lower
/// convex hull of `(√T, r(T))`, walked toward `T = 1`.
pub fn breakpoints(risks: &[f64]) -> Vec<Breakpoint> {
    let sq = |t: usize| (t as f64).sqrt();
    // T̂(0⁺): smallest T among the minimal risks
    let min = risks.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut cur = risks.iter().position(|&r| r == min).unwrap_or(0) + 1;
    let mut out = Vec::new();
    let mut last_c = 0.0;
    while cur > 1 {
        let mut next: Option<(usize, f64)> = None;
        for t in 1..cur {
            let c = (risks[t - 1] - risks[cur - 1]) / (sq(cur) - sq(t));
            match next {
                Some((_, best)) if c >= best => {}
                _ => next = Some((t, c)),
            }
        }
        let (t, c) = next.expect("cur > 1 leaves a smaller candidate");
        let c = c.max(last_c);
        out.push(Breakpoint { c, from_t: cur, to_t: t });
        last_c = c;
        cur = t;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeResult {
    pub grid: CGrid,
    /// `(c, T̂(c))` at every grid point.
    pub trace: Vec<(f64, usize)>,
    /// Midpoint of the first grid cell with the largest drop of `√T̂`.
    pub c_hat: f64,
    pub jump: f64,
    /// `T̂(2ĉ)`.
    pub selected_t: usize,
    pub breakpoints: Vec<Breakpoint>,
}

/// Calibrates the penalty `c√T` by the largest jump of `T̂(c)`.
///
/// `T̂(c)` is non-increasing, so the jump `√T̂(c+ε) − √T̂(c)` is taken in
/// magnitude.
pub fn slope_heuristic(risks: &[f64], grid: CGrid) -> Result<SlopeResult> {
    if risks.is_empty() {
        return invalid!("slope heuristic needs at least one risk");
    }
    for &r in risks {
        finite("risk", r)?;
    }
    let cs = grid.points()?;
    let trace: Vec<(f64, usize)> = cs.iter().map(|&c| (c, t_hat(risks, c))).collect();
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..trace.len() - 1 {
        let drop = (trace[k].1 as f64).sqrt() - (trace[k + 1].1 as f64).sqrt();
        if drop > best.1 {
            best = (k, drop);
        }
    }
    let c_hat = cs[best.0] + grid.step / 2.0;
    Ok(SlopeResult {
        grid,
        trace,
        c_hat,
        jump: best.1,
        selected_t: t_hat(risks, 2.0 * c_hat),
        breakpoints: breakpoints(risks),
    })
}

/// How the penalty constant `C₁` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PenaltyChoice {
    /// From the slope heuristic: the penalty at `2ĉ`.
    Calibrated,
    Fixed { c1: f64 },
    /// `C₁ = 4(1+ρ)L√𝒱` from Bernstein constants.
    Theoretical { inputs: BernsteinInputs },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodFit {
    pub t: usize,
    pub risk: f64,
    pub params: Vec<Vec<f64>>,
    /// `(C₁/2)√(T·H/(n−1))`
    pub penalty: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n: usize,
    pub t_max: usize,
    pub epsilon: f64,
    pub net_cardinality: usize,
    /// `H(F, ε)` at the net resolution.
    pub entropy: f64,
    pub c1: f64,
    pub per_t: Vec<PeriodFit>,
    pub selected_t_penalized: usize,
    pub slope: SlopeResult,
}

impl FitReport {
    pub fn c_hat(&self) -> f64 {
        self.slope.c_hat
    }

    pub fn selected_t_slope(&self) -> usize {
        self.slope.selected_t
    }

    pub fn risks(&self) -> Vec<f64> {
        self.per_t.iter().map(|p| p.risk).collect()
    }
}

/// ERM for every `T = 1..=t_max` on one net.
pub fn fit_all_periods(traj: &Trajectory, t_max: usize, net: &CoveringNet, loss: &LossSpec) -> Result<Vec<ErmFit>> {
    if t_max == 0 {
        return invalid!("t_max must be >= 1");
    }
    (1..=t_max).map(|t| erm_fit(traj, t, net, loss)).collect()
}

/// `T̂ = argmin_T [r_n(f̂_{1:T}) + (C₁/2)√(T·H/(n−1))]`, ties toward smaller
/// `T`. Returns `(T̂, per-T fits with penalties)`.
pub fn select_period_penalized(fits: &[ErmFit], c1: f64, entropy: f64, n: usize) -> Result<(usize, Vec<PeriodFit>)> {
    if fits.is_empty() {
        return invalid!("no fits to select from");
    }
    if !(finite("c1", c1)? >= 0.0) {
        return invalid!("c1 must be >= 0, got {c1}");
    }
    let scale = 0.5 * c1 * (entropy / (n - 1) as f64).sqrt();
    let per_t: Vec<PeriodFit> = fits
        .iter()
        .map(|f| {
            let penalty = scale * (f.t_period as f64).sqrt();
            PeriodFit { t: f.t_period, risk: f.risk, params: f.params.clone(), penalty, objective: f.risk + penalty }
        })
        .collect();
    let mut best = 0;
    for (i, p) in per_t.iter().enumerate() {
        if p.objective < per_t[best].objective {
            best = i;
        }
    }
    Ok((per_t[best].t, per_t))
}

/// Settings for [`fit_period`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    pub t_max: usize,
    pub class: PredictorClass,
    pub loss: LossSpec,
    /// Net resolution; defaults to `1/(L·n)`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_penalty")]
    pub penalty: PenaltyChoice,
    #[serde(default)]
    pub c_grid: Option<CGrid>,
    #[serde(default)]
    pub net_cap: Option<u64>,
}

fn default_penalty() -> PenaltyChoice {
    PenaltyChoice::Calibrated
}

impl FitSettings {
    pub fn new(t_max: usize, class: PredictorClass, loss: LossSpec) -> Self {
        FitSettings { t_max, class, loss, epsilon: None, penalty: PenaltyChoice::Calibrated, c_grid: None, net_cap: None }
    }

    pub fn epsilon_for(&self, n: usize) -> f64 {
        self.epsilon.unwrap_or(1.0 / (self.loss.lipschitz() * n as f64))
    }
}

/// ERM over `T = 1..=t_max`, penalised selection and the slope heuristic.
pub fn fit_period(traj: &Trajectory, settings: &FitSettings) -> Result<FitReport> {
    settings.loss.validate()?;
    settings.class.validate()?;
    if settings.class.dimension() != traj.dim {
        return invalid!("class dimension {} does not match data dimension {}", settings.class.dimension(), traj.dim);
    }
    let n = traj.len();
    if n < 2 {
        return invalid!("need at least 2 observations, got {n}");
    }
    let epsilon = settings.epsilon_for(n);
    let net = match settings.net_cap {
        Some(cap) => build_net_with_cap(&settings.class, epsilon, cap as u128)?,
        None => build_net_with_cap(&settings.class, epsilon, DEFAULT_NET_CAP)?,
    };
    let h = entropy(&settings.class, epsilon)?;
    let fits = fit_all_periods(traj, settings.t_max, &net, &settings.loss)?;
    let risks: Vec<f64> = fits.iter().map(|f| f.risk).collect();
    let grid = settings.c_grid.unwrap_or_else(|| CGrid::default_for(&risks));
    let slope = slope_heuristic(&risks, grid)?;
    // c√T = (C₁/2)√(T·H/(n−1)) at c = 2ĉ
    let c1 = match settings.penalty {
        PenaltyChoice::Calibrated => 4.0 * slope.c_hat * ((n - 1) as f64 / h).sqrt(),
        PenaltyChoice::Fixed { c1 } => c1,
        PenaltyChoice::Theoretical { inputs } => {
            risk_constants_from(settings.loss.lipschitz(), 0.0, 0.0, &BernsteinInputs { n, ..inputs })?.c1
        }
    };
    let (selected, per_t) = select_period_penalized(&fits, c1, h, n)?;
    Ok(FitReport {
        n,
        t_max: settings.t_max,
        epsilon,
        net_cardinality: net.cardinality(),
        entropy: h,
        c1,
        per_t,
        selected_t_penalized: selected,
        slope,
    })
}

/// Convenience for the default net `1/(L·n)`.
pub fn default_net(class: &PredictorClass, loss: &LossSpec, n: usize) -> Result<CoveringNet> {
    build_net(class, 1.0 / (loss.lipschitz() * n as f64))
}
