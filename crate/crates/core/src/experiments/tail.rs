use serde::{Deserialize, Serialize};

use super::{bernoulli_stderr, SIGMA_MARGIN};
use crate::chain::moments::sample_g_values;
use crate::chain::{fit_joint_moment_constants, ChainModel, Metric};
use crate::concentration::{bernstein_tail, cramer_bound, rio_tail, BernsteinInputs, CramerInputs, McDiarmidInputs};
use crate::error::{finite, invalid, Result};
use crate::io::{csv_string, fmt_real};
use crate::parallel::{map_replicates, mean_stderr};
use crate::seed::{derive_seed, replicate_rng};

/// Fewer replicates make the 3σ margin too coarse to detect a false bound.
pub const MIN_REPLICATES: u64 = 10_000;
pub const MAX_REPLICATES: u64 = 100_000_000;
const GRID_POINTS: usize = 20;
const GRID_P_HI: f64 = 0.5;
const GRID_P_LO: f64 = 1e-4;
const DEFAULT_K_MAX: u32 = 8;

/// Separately 1-Lipschitz functionals of the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFunctional {
    /// `Σ_t Σ_i X_{t,i} / √d`.
    CoordinateSum,
    /// `Σ_t ‖X_t‖`.
    SumOfNorms,
}

impl TailFunctional {
    pub fn eval_state(self, x: &[f64], metric: Metric) -> f64 {
        match self {
            TailFunctional::CoordinateSum => {
                let s: f64 = x.iter().sum();
                if x.len() == 1 {
                    s
                } else {
                    s / (x.len() as f64).sqrt()
                }
            }
            TailFunctional::SumOfNorms => metric.norm(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    Bernstein,
    Cramer,
    Mcdiarmid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BoundInputs {
    Bernstein(BernsteinInputs),
    Cramer(CramerInputs),
    Mcdiarmid(McDiarmidInputs),
}

impl BoundInputs {
    pub fn family(&self) -> BoundFamily {
        match self {
            BoundInputs::Bernstein(_) => BoundFamily::Bernstein,
            BoundInputs::Cramer(_) => BoundFamily::Cramer,
            BoundInputs::Mcdiarmid(_) => BoundFamily::Mcdiarmid,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            BoundInputs::Bernstein(i) => i.n,
            BoundInputs::Cramer(i) => i.n,
            BoundInputs::Mcdiarmid(i) => i.n,
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            BoundInputs::Bernstein(i) => i.rho,
            BoundInputs::Cramer(i) => i.rho,
            BoundInputs::Mcdiarmid(i) => i.rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BoundInputs::Bernstein(i) => i.validate(),
            BoundInputs::Cramer(i) => i.validate(),
            BoundInputs::Mcdiarmid(i) => i.validate(),
        }
    }

    /// `(sharp, simple)` one-sided tail bounds at `x ≥ 0`:
    /// Bernstein refined/simple, Cramér refined/loose, Rio/McDiarmid.
    pub fn tail(&self, x: f64) -> Result<(f64, f64)> {
        match self {
            BoundInputs::Bernstein(i) => Ok((bernstein_tail(i, x, true)?.value, bernstein_tail(i, x, false)?.value)),
            BoundInputs::Cramer(i) => {
                let t = cramer_bound(i, x)?;
                Ok((t.refined, t.loose))
            }
            BoundInputs::Mcdiarmid(i) => {
                let c = crate::concentration::mcdiarmid_constants(i)?;
                if finite("x", x)? > c.d {
                    // |S_n| ≤ D surely
                    let simple = rio_tail(i, c.d)?.mcdiarmid.min((-2.0 * x * x / c.m2).exp());
                    return Ok((0.0, simple));
                }
                let t = rio_tail(i, x)?;
                Ok((t.rio, t.mcdiarmid))
            }
        }
    }
}

/// A Monte Carlo check of one tail bound on one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailExperiment {
    pub model: ChainModel,
    pub functional: TailFunctional,
    pub n: usize,
    pub replicates: u64,
    /// Defaults to 20 quantiles of the centering batch at upper-tail
    /// probabilities log-spaced from 0.5 to 1e-4.
    #[serde(default)]
    pub x_grid: Option<Vec<f64>>,
    pub bound_family: BoundFamily,
    /// Defaults to constants fitted from the model.
    #[serde(default)]
    pub bound_inputs: Option<BoundInputs>,
    #[serde(default)]
    pub base_seed: u64,
    /// Highest moment used when fitting Bernstein constants.
    #[serde(default = "default_k_max")]
    pub k_max: u32,
}

fn default_k_max() -> u32 {
    DEFAULT_K_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub x: f64,
    /// `#{S ≥ x}/R`
    pub empirical_upper_freq: f64,
    /// `#{−S ≥ x}/R`
    pub empirical_lower_freq: f64,
    pub theoretical_bound: f64,
    pub bound_simple: f64,
    /// Binomial standard error of the larger frequency.
    pub mc_stderr: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub family: BoundFamily,
    pub functional: TailFunctional,
    pub n: usize,
    pub replicates: u64,
    pub base_seed: u64,
    pub inputs: BoundInputs,
    pub centering_estimate: f64,
    pub centering_stderr: f64,
    pub rows: Vec<TailRow>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &["x", "empirical_upper_freq", "empirical_lower_freq", "theoretical_bound", "bound_simple", "mc_stderr", "pass"],
            self.rows.iter().map(|r| {
                vec![
                    fmt_real(r.x),
                    fmt_real(r.empirical_upper_freq),
                    fmt_real(r.empirical_lower_freq),
                    fmt_real(r.theoretical_bound),
                    fmt_real(r.bound_simple),
                    fmt_real(r.mc_stderr),
                    r.pass.to_string(),
                ]
            }),
        )
    }
}

impl TailExperiment {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n == 0 {
            return invalid!("n must be >= 1");
        }
        if self.replicates < MIN_REPLICATES {
            return invalid!(
                "replicates must be >= {MIN_REPLICATES} for the 3-standard-error criterion, got {}",
                self.replicates
            );
        }
        if self.replicates > MAX_REPLICATES {
            return invalid!("replicates must be <= {MAX_REPLICATES}, got {}", self.replicates);
        }
        if self.k_max < 2 {
            return invalid!("k_max must be >= 2, got {}", self.k_max);
        }
        if let Some(grid) = &self.x_grid {
            if grid.is_empty() {
                return invalid!("x_grid must not be empty");
            }
            for &x in grid {
                if !(finite("x_grid entry", x)? >= 0.0) {
                    return invalid!("x_grid entries must be >= 0, got {x}");
                }
            }
            if grid.windows(2).any(|w| w[1] < w[0]) {
                return invalid!("x_grid must be sorted ascending");
            }
        }
        if let Some(inputs) = &self.bound_inputs {
            if inputs.family() != self.bound_family {
                return invalid!("bound_inputs are for {:?}, bound_family is {:?}", inputs.family(), self.bound_family);
            }
            if inputs.n() != self.n {
                return invalid!("bound_inputs.n = {} does not match n = {}", inputs.n(), self.n);
            }
            if inputs.rho() < self.model.rho {
                return invalid!("bound_inputs.rho = {} is below the model rho {}", inputs.rho(), self.model.rho);
            }
            inputs.validate()?;
        }
        Ok(())
    }

    /// `f(X_1..X_n)` for replicate `index`.
    fn sample(&self, index: u64) -> f64 {
        let mut rng = replicate_rng(self.base_seed, index);
        let metric = self.model.metric;
        let mut acc = 0.0;
        self.model.run_path(self.n, &mut rng, |_, x| acc += self.functional.eval_state(x, metric));
        acc
    }
}

/// Constants for `family` fitted to `model`: Bernstein from sampled moments
/// of the dominating variables, Cramér with `a = 1` and sample exponential
/// moments, McDiarmid from the law diameters.
pub fn fit_bound_inputs(
    model: &ChainModel,
    family: BoundFamily,
    n: usize,
    samples: usize,
    k_max: u32,
    seed: u64,
) -> Result<BoundInputs> {
    model.validate()?;
    let rho = model.rho;
    match family {
        BoundFamily::Bernstein => {
            let (gx, ge) = sample_g_values(model, samples, derive_seed(seed, "bernstein-moments"))?;
            let mc = fit_joint_moment_constants(&gx, &ge, k_max)?;
            Ok(BoundInputs::Bernstein(BernsteinInputs { n, rho, m: mc.m, v1: mc.v1, v2: mc.v2 }))
        }
        BoundFamily::Cramer => {
            let (gx, ge) = sample_g_values(model, samples, derive_seed(seed, "cramer-moments"))?;
            let a = 1.0;
            let k = |g: &[f64]| {
                let e: Vec<f64> = g.iter().map(|v| (a * v).exp()).collect();
                mean_stderr(&e).0.max(1.0)
            };
            let (k1, k2) = (k(&gx), k(&ge));
            if !(k1.is_finite() && k2.is_finite()) {
                return invalid!("exponential moments of the dominating variables overflow at a = {a}");
            }
            Ok(BoundInputs::Cramer(CramerInputs { n, rho, a, k1, k2 }))
        }
        BoundFamily::Mcdiarmid => {
            let (Some(m1), Some(me)) = (model.init.diameter(model.metric), model.noise.diameter(model.metric)) else {
                return invalid!("McDiarmid constants need bounded initial and noise laws");
            };
            let me = model.noise_c * me;
            if !(m1 > 0.0 && me > 0.0) {
                return invalid!("McDiarmid constants need non-degenerate laws, got diameters {m1} and {me}");
            }
            let mut m_k = vec![me; n];
            m_k[0] = m1;
            Ok(BoundInputs::Mcdiarmid(McDiarmidInputs { n, rho, m_k }))
        }
    }
}

/// Upper-tail quantiles of `values` at probabilities log-spaced from 0.5
/// to 1e-4, clamped at 0.
pub fn quantile_grid(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len();
    let ratio = (GRID_P_LO / GRID_P_HI).ln();
    (0..GRID_POINTS)
        .map(|j| {
            let p = GRID_P_HI * (ratio * j as f64 / (GRID_POINTS - 1) as f64).exp();
            let idx = (((1.0 - p) * r as f64).ceil() as usize).min(r - 1);
            sorted[idx].max(0.0)
        })
        .collect()
}

/// `#{v ≥ x}` in an ascending slice.
fn count_at_least(sorted: &[f64], x: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v < x)
}

/// Compares one-sided empirical tail frequencies of `S_n` with the bound.
///
/// Test replicates use indices `0..R`; the centering `E f` is estimated from
/// the independent batch `R..2R`, which also supplies the default grid.
pub fn run_tail_experiment(exp: &TailExperiment) -> Result<ValidationReport> {
    exp.validate()?;
    let r = exp.replicates;
    let inputs = match &exp.bound_inputs {
        Some(i) => i.clone(),
        None => fit_bound_inputs(&exp.model, exp.bound_family, exp.n, r as usize, exp.k_max, exp.base_seed)?,
    };
    let center_batch = map_replicates(r, r, |i| exp.sample(i));
    let (center, center_se) = mean_stderr(&center_batch);
    let grid = match &exp.x_grid {
        Some(g) => g.clone(),
        None => {
            let centred: Vec<f64> = center_batch.iter().map(|v| v - center).collect();
            quantile_grid(&centred)
        }
    };
    drop(center_batch);
    let mut upper: Vec<f64> = map_replicates(0, r, |i| exp.sample(i) - center);
    let mut lower: Vec<f64> = upper.iter().map(|s| -s).collect();
    upper.sort_by(f64::total_cmp);
    lower.sort_by(f64::total_cmp);
    let rows = grid
        .iter()
        .map(|&x| {
            let pu = count_at_least(&upper, x) as f64 / r as f64;
            let pl = count_at_least(&lower, x) as f64 / r as f64;
            let (bound, simple) = inputs.tail(x)?;
            let se = bernoulli_stderr(pu.max(pl), r);
            let pass = pu.max(pl) <= bound + SIGMA_MARGIN * se;
            Ok(TailRow {
                x,
                empirical_upper_freq: pu,
                empirical_lower_freq: pl,
                theoretical_bound: bound,
                bound_simple: simple,
                mc_stderr: se,
                pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = rows.iter().all(|r| r.pass);
    Ok(ValidationReport {
        family: exp.bound_family,
        functional: exp.functional,
        n: exp.n,
        replicates: r,
        base_seed: exp.base_seed,
        inputs,
        centering_estimate: center,
        centering_stderr: center_se,
        rows,
        passed,
    })
}
