use serde::{Deserialize, Serialize};

use super::SIGMA_MARGIN;
use crate::chain::model::operator_norm;
use crate::chain::{ChainModel, Trajectory};
use crate::error::{finite, invalid, Result};
use crate::io::{csv_string, fmt_real};
use crate::parallel::{map_replicates, mean_stderr};
use crate::periodic_ar::{empirical_risk, LossSpec};
use crate::seed::replicate_rng;

/// Phase-moment differences within this many standard errors certify the
/// periodic law.
const CERTIFY_SIGMA: f64 = 4.0;
/// Residual influence of the initial law left after the default burn-in.
const BURN_IN_RESIDUAL: f64 = 1e-12;

/// Inputs of [`check_risk_stationarity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskCheck {
    pub t_period: usize,
    pub loss: LossSpec,
    /// `f_1..f_T`, each a row-major `d×d` coefficient matrix.
    pub predictors: Vec<Vec<f64>>,
    pub n: usize,
    pub replicates: u64,
    /// Discarded warm-up states; a multiple of the model period. Defaults to
    /// the first multiple with `ρ^burn_in ≤ 1e-12`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMomentRow {
    pub phase: usize,
    /// Time of the last complete block's state at this phase.
    pub late_t: usize,
    /// Mean of `‖X_late‖² − ‖X_phase‖²` over replicates.
    pub diff: f64,
    pub stderr: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub t_period: usize,
    pub n: usize,
    pub burn_in: usize,
    pub replicates: u64,
    /// `L(1+ρ)[G_ε(0)/(1−ρ) + G_{X₁}(0)]` with `G_{X₁}(0)` bounded by the
    /// moment bound at `burn_in + 1`.
    pub c0: f64,
    /// `C₀ (T+1)/(n−1)`
    pub bound: f64,
    pub r_n: f64,
    pub r_t1: f64,
    /// Mean and standard error of the paired difference `r_n − r_{T+1}`.
    pub diff: f64,
    pub diff_stderr: f64,
    /// `n = (k+1)T + 1`, where the two risks coincide.
    pub case3_boundary: bool,
    pub periodic_certified: bool,
    pub phase_moments: Vec<PhaseMomentRow>,
    pub pass: bool,
}

impl StationarityReport {
    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &["phase", "late_t", "diff", "stderr", "ok"],
            self.phase_moments.iter().map(|r| {
                vec![r.phase.to_string(), r.late_t.to_string(), fmt_real(r.diff), fmt_real(r.stderr), r.ok.to_string()]
            }),
        )
    }
}

fn default_burn_in(rho: f64, period: usize) -> usize {
    let steps = if rho == 0.0 { 1.0 } else { (BURN_IN_RESIDUAL.ln() / rho.ln()).ceil().max(1.0) };
    (steps as usize).div_ceil(period) * period
}

/// Checks `|R_{T+1} − R_n| ≤ C₀(T+1)/(n−1)` by Monte Carlo on paired
/// per-path risks, after a warm-up that puts the chain in its periodic regime.
pub fn check_risk_stationarity(model: &ChainModel, check: &RiskCheck) -> Result<StationarityReport> {
    model.validate()?;
    let t = check.t_period;
    let n = check.n;
    let d = model.dimension();
    check.loss.validate()?;
    check.loss.check_dimension(d)?;
    if t == 0 || check.predictors.len() != t {
        return invalid!("need t_period >= 1 predictors, got t_period = {t} and {} predictors", check.predictors.len());
    }
    if n < t + 1 {
        return invalid!("n = {n} must be >= T + 1 = {}", t + 1);
    }
    if n > 10_000_000 {
        return invalid!("n = {n} is too large");
    }
    if check.replicates < 2 {
        return invalid!("need at least 2 replicates, got {}", check.replicates);
    }
    for p in &check.predictors {
        if p.len() != d * d {
            return invalid!("predictor has {} coefficients, expected {}", p.len(), d * d);
        }
        for &a in p {
            finite("predictor coefficient", a)?;
        }
        let lip = if d == 1 { p[0].abs() } else { operator_norm(p, d) };
        if lip > model.rho * (1.0 + 1e-9) {
            return invalid!("predictor Lipschitz constant {lip} exceeds rho = {}", model.rho);
        }
    }
    let period = model.maps.period();
    let burn_in = check.burn_in.unwrap_or_else(|| default_burn_in(model.rho, period));
    if burn_in % period != 0 {
        return invalid!("burn_in = {burn_in} must be a multiple of the model period {period}");
    }
    if burn_in > 10_000_000 {
        return invalid!("burn_in = {burn_in} is too large");
    }

    // per replicate: r_n, r_{T+1}, then per phase ‖X_j‖² and ‖X_late‖²
    let late: Vec<usize> = (1..=t.min(n)).map(|j| j + (n - j) / t * t).collect();
    let per_rep: Vec<Result<Vec<f64>>> = map_replicates(0, check.replicates, |i| {
        let mut rng = replicate_rng(check.base_seed, i);
        let mut states = Vec::with_capacity(n * d);
        model.run_warm_path(n, burn_in, &mut rng, |_, x| states.extend_from_slice(x));
        let traj = Trajectory::from_states(states, d)?;
        let r_n = empirical_risk(&traj, &check.predictors, &check.loss)?;
        let head = Trajectory::from_states(traj.states[..(t + 1) * d].to_vec(), d)?;
        let r_t1 = empirical_risk(&head, &check.predictors, &check.loss)?;
        let mut out = vec![r_n, r_t1];
        let sq = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>();
        for (j, &lt) in late.iter().enumerate() {
            out.push(sq(traj.state(j + 1)));
            out.push(sq(traj.state(lt)));
        }
        Ok(out)
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let col = |f: &dyn Fn(&[f64]) -> f64| per_rep.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let (r_n, _) = mean_stderr(&col(&|r| r[0]));
    let (r_t1, _) = mean_stderr(&col(&|r| r[1]));
    let (diff, diff_stderr) = mean_stderr(&col(&|r| r[0] - r[1]));

    let phase_moments: Vec<PhaseMomentRow> = late
        .iter()
        .enumerate()
        .map(|(j, &lt)| {
            let (m, se) = mean_stderr(&col(&|r| r[3 + 2 * j] - r[2 + 2 * j]));
            PhaseMomentRow { phase: j + 1, late_t: lt, diff: m, stderr: se, ok: m.abs() <= CERTIFY_SIGMA * se + 1e-12 }
        })
        .collect();
    let periodic_certified = t % period == 0 && phase_moments.iter().all(|r| r.ok);
    if !periodic_certified {
        log::warn!("the law of the warmed chain is not certified {t}-periodic; the stationarity bound may not apply");
    }

    let zero = vec![0.0; d];
    let rho = model.rho;
    let c0 = check.loss.lipschitz()
        * (1.0 + rho)
        * (model.g_eps(&zero)? / (1.0 - rho) + model.expected_norm_bound(burn_in + 1)?);
    let bound = c0 * (t + 1) as f64 / (n - 1) as f64;
    let pass = diff.abs() <= bound + SIGMA_MARGIN * diff_stderr;
    Ok(StationarityReport {
        t_period: t,
        n,
        burn_in,
        replicates: check.replicates,
        c0,
        bound,
        r_n,
        r_t1,
        diff,
        diff_stderr,
        case3_boundary: (n - 1) % t == 0,
        periodic_certified,
        phase_moments,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_mean_abs_dev;

    fn seasonal() -> ChainModel {
        ChainModel::gaussian_ar1(vec![0.8, 0.5, 0.9, -0.7], 1.0, 1.0)
    }

    fn check(t: usize, predictors: Vec<Vec<f64>>, n: usize) -> RiskCheck {
        RiskCheck { t_period: t, loss: LossSpec::Absolute, predictors, n, replicates: 20_000, burn_in: None, base_seed: 5 }
    }

    #[test]
    fn default_burn_in_is_a_period_multiple() {
        assert_eq!(default_burn_in(0.0, 4), 4);
        assert_eq!(default_burn_in(0.5, 1), 40);
        assert_eq!(default_burn_in(0.9, 4), 264);
    }

    #[test]
    fn stationary_ar1_passes() {
        let model = ChainModel::gaussian_ar1(vec![0.5], 1.0, 1.0);
        let rep = check_risk_stationarity(&model, &check(1, vec![vec![0.3]], 30)).unwrap();
        assert!(rep.pass && rep.periodic_certified);
        assert!(rep.case3_boundary);
        // T = 1: bound 2C₀/(n−1)
        assert!((rep.bound - 2.0 * rep.c0 / 29.0).abs() < 1e-15);
    }

    #[test]
    fn case3_boundary_has_equal_risks() {
        let model = seasonal();
        let preds = vec![vec![0.8], vec![0.5], vec![0.9], vec![-0.7]];
        let rep = check_risk_stationarity(&model, &check(4, preds, 41)).unwrap();
        assert!(rep.case3_boundary && rep.periodic_certified && rep.pass);
        assert!(rep.diff.abs() <= 3.0 * rep.diff_stderr, "{rep:?}");
    }

    #[test]
    fn seasonal_chain_off_boundary() {
        let model = seasonal();
        let preds = vec![vec![0.0], vec![0.2], vec![-0.4], vec![0.9]];
        let rep = check_risk_stationarity(&model, &check(4, preds, 43)).unwrap();
        assert!(!rep.case3_boundary);
        assert!(rep.pass && rep.periodic_certified);
    }

    #[test]
    fn exact_predictors_have_mean_abs_noise_risk() {
        // ERM phase j predicts X_i with coefficient coeffs[j−1]
        let model = seasonal();
        let preds = vec![vec![0.8], vec![0.5], vec![0.9], vec![-0.7]];
        let rep = check_risk_stationarity(&model, &check(4, preds, 101)).unwrap();
        let target = normal_mean_abs_dev(0.0, 1.0);
        assert!((rep.r_n - target).abs() < 0.01, "{}", rep.r_n);
    }

    #[test]
    fn mismatched_period_is_not_certified() {
        let model = seasonal();
        let rep = check_risk_stationarity(&model, &check(3, vec![vec![0.0]; 3], 31)).unwrap();
        assert!(!rep.periodic_certified);
    }

    #[test]
    fn rejections() {
        let model = seasonal();
        assert!(check_risk_stationarity(&model, &check(4, vec![vec![0.0]; 3], 41)).is_err());
        assert!(check_risk_stationarity(&model, &check(4, vec![vec![0.0]; 4], 4)).is_err());
        assert!(check_risk_stationarity(&model, &check(1, vec![vec![0.95]], 10)).is_err());
        let mut c = check(1, vec![vec![0.5]], 10);
        c.burn_in = Some(6);
        assert!(check_risk_stationarity(&model, &c).is_err());
    }
}
