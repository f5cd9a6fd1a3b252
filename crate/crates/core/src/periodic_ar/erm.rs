use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::class::CoveringNet;
use super::loss::LossSpec;
use crate::chain::Trajectory;
use crate::error::{invalid, Result};

/// `i[T] ∈ {1, …, T}` with `i − i[T] ∈ TZ`.
pub fn phase_index(i: usize, t_period: usize) -> usize {
    debug_assert!(i >= 1 && t_period >= 1);
    (i - 1) % t_period + 1
}

fn predict_into(a: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = a[r * d..(r + 1) * d].iter().zip(x).map(|(a, x)| a * x).sum();
    }
}

/// Loss of predicting `X_i` from `X_{i−1}` with coefficients `a`.
fn step_loss(traj: &Trajectory, i: usize, a: &[f64], loss: &LossSpec, buf: &mut [f64]) -> f64 {
    let (prev, cur) = (traj.state(i - 1), traj.state(i));
    if buf.len() == 1 {
        return loss.eval(cur[0] - a[0] * prev[0]);
    }
    predict_into(a, prev, buf);
    for (b, c) in buf.iter_mut().zip(cur) {
        *b = c - *b;
    }
    loss.eval_vec(buf)
}

fn check_inputs(traj: &Trajectory, loss: &LossSpec) -> Result<()> {
    if traj.len() < 2 {
        return invalid!("empirical risk needs at least 2 states, got {}", traj.len());
    }
    loss.validate()?;
    loss.check_dimension(traj.dim)
}

/// `r_n(f_{1:T}) = (1/(n−1)) Σ_{i=2}^n ℓ(X_i − f_{i[T]}(X_{i−1}))`, with
/// `T = predictors.len()`.
pub fn empirical_risk(traj: &Trajectory, predictors: &[Vec<f64>], loss: &LossSpec) -> Result<f64> {
    check_inputs(traj, loss)?;
    if predictors.is_empty() {
        return invalid!("at least one predictor is required");
    }
    let d = traj.dim;
    if let Some(p) = predictors.iter().find(|p| p.len() != d * d) {
        return invalid!("predictor has {} coefficients, expected {}", p.len(), d * d);
    }
    let t = predictors.len();
    let mut buf = vec![0.0; d];
    let n = traj.len();
    let total: f64 = (2..=n).map(|i| step_loss(traj, i, &predictors[phase_index(i, t) - 1], loss, &mut buf)).sum();
    Ok(total / (n - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErmFit {
    pub t_period: usize,
    /// Per phase `j = 1..T`, the chosen coefficients.
    pub params: Vec<Vec<f64>>,
    /// Per phase, the index of the chosen net member.
    pub member_indices: Vec<usize>,
    /// `r_n` of the chosen tuple.
    pub risk: f64,
}

/// Exact minimiser of `r_n` over `net^T`.
///
/// `r_n` is a sum over phases of terms that only involve `f_j`, so each phase
/// is minimised on its own. Members are scanned in parallel; the argmin is
/// taken afterwards in net order, so ties go to the lexicographically
/// smallest member whatever the thread count.
pub fn erm_fit(traj: &Trajectory, t_period: usize, net: &CoveringNet, loss: &LossSpec) -> Result<ErmFit> {
    check_inputs(traj, loss)?;
    if net.members.is_empty() {
        return invalid!("covering net is empty");
    }
    if t_period == 0 {
        return invalid!("period must be >= 1");
    }
    let d = traj.dim;
    if net.dimension != d {
        return invalid!("net dimension {} does not match trajectory dimension {d}", net.dimension);
    }
    let n = traj.len();
    if n < t_period + 1 {
        log::warn!("trajectory of length {n} leaves some of the {t_period} phases without observations");
    }
    // phase_sums[m][j]: summed loss of member m on phase j + 1
    let phase_sums: Vec<Vec<f64>> = net
        .members
        .par_iter()
        .map(|a| {
            let mut buf = vec![0.0; d];
            let mut sums = vec![0.0; t_period];
            for i in 2..=n {
                sums[phase_index(i, t_period) - 1] += step_loss(traj, i, a, loss, &mut buf);
            }
            sums
        })
        .collect();
    let mut member_indices = vec![0usize; t_period];
    for (j, best) in member_indices.iter_mut().enumerate() {
        for m in 1..phase_sums.len() {
            if phase_sums[m][j] < phase_sums[*best][j] {
                *best = m;
            }
        }
    }
    let params: Vec<Vec<f64>> = member_indices.iter().map(|&m| net.members[m].clone()).collect();
    let risk = empirical_risk(traj, &params, loss)?;
    Ok(ErmFit { t_period, params, member_indices, risk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainModel, LawSpec};
    use crate::periodic_ar::{build_net, PredictorClass};
    use crate::seed::replicate_rng;
    use rand::Rng;

    #[test]
    fn phase_index_examples() {
        assert_eq!(phase_index(5, 4), 1);
        assert_eq!(phase_index(4, 4), 4);
        assert_eq!(phase_index(7, 3), 1);
        assert_eq!(phase_index(1, 1), 1);
    }

    #[test]
    fn risk_examples() {
        let x = Trajectory::scalar(&[1.0, 2.0, 3.0]);
        assert_eq!(empirical_risk(&x, &[vec![0.0]], &LossSpec::Absolute).unwrap(), 2.5);
        assert_eq!(empirical_risk(&x, &[vec![0.5]], &LossSpec::Absolute).unwrap(), 1.75);
        assert!(empirical_risk(&Trajectory::scalar(&[1.0]), &[vec![0.0]], &LossSpec::Absolute).is_err());
    }

    #[test]
    fn noiseless_periodic_chain_is_fit_exactly() {
        let mut model = ChainModel::gaussian_ar1(vec![0.5, -0.5, 0.25], 1.0, 1.0);
        model.noise = LawSpec::point_mass(0.0, 1);
        model.init = LawSpec::point_mass(3.0, 1);
        let traj = crate::chain::simulate(&model, 30, 1, 0).unwrap();
        let net = build_net(&PredictorClass::ScalarAr1 { rho_max: 0.9 }, 0.25).unwrap();
        let fit = erm_fit(&traj, 3, &net, &LossSpec::Absolute).unwrap();
        assert_eq!(fit.risk, 0.0);
        // phase j recovers the coefficient listed in slot j − 1
        assert_eq!(fit.params, vec![vec![0.5], vec![-0.5], vec![0.25]]);
    }

    #[test]
    fn alternating_series_matches_product_scan() {
        let xs: Vec<f64> = (0..12).map(|i| (i % 2) as f64).collect();
        let traj = Trajectory::scalar(&xs);
        let net = CoveringNet::from_members(0.5, 1, vec![vec![-0.5], vec![0.0], vec![0.5]]).unwrap();
        let fit = erm_fit(&traj, 1, &net, &LossSpec::Absolute).unwrap();
        let scan: Vec<f64> =
            net.members.iter().map(|m| empirical_risk(&traj, &[m.clone()], &LossSpec::Absolute).unwrap()).collect();
        let best = scan.iter().cloned().fold(f64::INFINITY, f64::min);
        let first = scan.iter().position(|&r| r == best).unwrap();
        assert_eq!(fit.risk, best);
        assert_eq!(fit.member_indices, vec![first]);
    }

    #[test]
    fn thread_count_does_not_change_fit() {
        let model = ChainModel::gaussian_ar1(vec![0.8, 0.5, 0.9, -0.7], 1.0, 1.0);
        let traj = crate::chain::simulate(&model, 200, 9, 0).unwrap();
        let net = build_net(&PredictorClass::ScalarAr1 { rho_max: 0.9 }, 0.005).unwrap();
        let one = crate::parallel::with_threads(1, || erm_fit(&traj, 4, &net, &LossSpec::Absolute).unwrap());
        let many = crate::parallel::with_threads(8, || erm_fit(&traj, 4, &net, &LossSpec::Absolute).unwrap());
        assert_eq!(one, many);
    }

    #[test]
    fn vector_fit_runs() {
        let mut rng = replicate_rng(4, 0);
        let states: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let traj = Trajectory::from_states(states, 2).unwrap();
        let net = build_net(&PredictorClass::Var1 { dimension: 2, rho_max: 0.5 }, 0.4).unwrap();
        let fit = erm_fit(&traj, 2, &net, &LossSpec::Huber { kappa: 1.0 }).unwrap();
        for m in &net.members {
            for j in 0..2 {
                let mut p = fit.params.clone();
                p[j] = m.clone();
                assert!(empirical_risk(&traj, &p, &LossSpec::Huber { kappa: 1.0 }).unwrap() >= fit.risk - 1e-12);
            }
        }
    }
}
