//! Moment constants `(M, V₁, V₂)` for the Bernstein condition
//! `E[G^k] ≤ (k!/2)·V·M^{k−2}`, `k ≥ 2`.

use serde::{Deserialize, Serialize};

use super::dist::Family;
use super::model::ChainModel;
use crate::error::{invalid, Result};
use crate::seed::{derive_seed, replicate_rng};

const GRID_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConstants {
    pub m: f64,
    pub v1: f64,
    pub v2: f64,
    pub k_max: u32,
    pub method: MomentMethod,
}

fn factorial(k: u32) -> f64 {
    (2..=k).map(f64::from).product()
}

/// Empirical raw moments `μ_k`, `k = 2..=k_max`, summed in sample order.
pub fn raw_moments(samples: &[f64], k_max: u32) -> Vec<f64> {
    let n = samples.len() as f64;
    (2..=k_max)
        .map(|k| samples.iter().map(|g| g.powi(k as i32)).sum::<f64>() / n)
        .collect()
}

/// Smallest feasible `v` for a given `m`: `max_k 2μ_k / (k!·m^{k−2})`.
pub fn v_for_m(moments: &[f64], m: f64) -> f64 {
    moments
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let k = i as u32 + 2;
            if mu == 0.0 {
                0.0
            } else {
                2.0 * mu / (factorial(k) * m.powi(k as i32 - 2))
            }
        })
        .fold(0.0, f64::max)
}

fn check_samples(samples: &[f64], k_max: u32) -> Result<f64> {
    if samples.is_empty() {
        return invalid!("moment fitting needs at least one sample");
    }
    if k_max < 2 {
        return invalid!("k_max must be >= 2, got {k_max}");
    }
    let mut max = 0.0f64;
    for &g in samples {
        if !(g >= 0.0 && g.is_finite()) {
            return invalid!("G samples must be finite and >= 0, got {g}");
        }
        max = max.max(g);
    }
    Ok(max)
}

/// The `m` grid: 512 geometric points from `max/k_max` to `max`.
fn m_grid(max: f64, k_max: u32) -> Vec<f64> {
    let lo = max / f64::from(k_max);
    let ratio = max / lo;
    let mut grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| lo * ratio.powf(i as f64 / (GRID_POINTS - 1) as f64))
        .collect();
    grid[GRID_POINTS - 1] = max;
    grid
}

/// Fits `(v, m)` from samples of a dominating variable `G`.
///
/// Scans `m` over the grid and keeps the smallest `v(m)`; ties go to the
/// smaller `m`. All-zero samples give `(0, 0)`.
pub fn fit_moment_constants(samples: &[f64], k_max: u32) -> Result<(f64, f64)> {
    let max = check_samples(samples, k_max)?;
    if max == 0.0 {
        return Ok((0.0, 0.0));
    }
    let moments = raw_moments(samples, k_max);
    let mut best = (f64::INFINITY, f64::NAN);
    for m in m_grid(max, k_max) {
        let v = v_for_m(&moments, m);
        if v < best.0 {
            best = (v, m);
        }
    }
    Ok(best)
}

/// Fits a common `M` for both dominating variables: each is fitted alone,
/// `M` is the larger of the two and both `V`s are re-evaluated at it.
pub fn fit_joint_moment_constants(samples_x1: &[f64], samples_eps: &[f64], k_max: u32) -> Result<MomentConstants> {
    let (_, m1) = fit_moment_constants(samples_x1, k_max)?;
    let (_, m2) = fit_moment_constants(samples_eps, k_max)?;
    let m = m1.max(m2);
    let v_at = |s: &[f64]| if m == 0.0 { 0.0 } else { v_for_m(&raw_moments(s, k_max), m) };
    Ok(MomentConstants { m, v1: v_at(samples_x1), v2: v_at(samples_eps), k_max, method: MomentMethod::Empirical })
}

/// Worst ratio `μ_k / ((k!/2)·v·m^{k−2})` over `k = 2..=k_max`; feasible iff ≤ 1.
pub fn moment_condition_ratio(samples: &[f64], v: f64, m: f64, k_max: u32) -> f64 {
    raw_moments(samples, k_max)
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let k = i as u32 + 2;
            let rhs = 0.5 * factorial(k) * v * m.powi(k as i32 - 2);
            if mu == 0.0 {
                0.0
            } else if rhs == 0.0 {
                f64::INFINITY
            } else {
                mu / rhs
            }
        })
        .fold(0.0, f64::max)
}

/// Independent draws of `G_{X₁}(X₁)` and `G_ε(ε)`.
pub fn sample_g_values(model: &ChainModel, count: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = model.dimension();
    let mut buf = vec![0.0; d];
    let mut rng = replicate_rng(derive_seed(seed, "g-x1"), 0);
    let mut gx = Vec::with_capacity(count);
    for _ in 0..count {
        model.init.sample_into(&mut rng, &mut buf);
        gx.push(model.g_x1(&buf)?);
    }
    let mut rng = replicate_rng(derive_seed(seed, "g-eps"), 0);
    let mut ge = Vec::with_capacity(count);
    for _ in 0..count {
        model.noise.sample_into(&mut rng, &mut buf);
        ge.push(model.g_eps(&buf)?);
    }
    Ok((gx, ge))
}

/// Exact constants for bounded dominating variables.
///
/// If `0 ≤ G ≤ b` then `E G^k ≤ b^{k−2} E G² ≤ (k!/2)·E G²·(b/3)^{k−2}`
/// because `k!/2 ≥ 3^{k−2}`. Available for scalar discrete and uniform laws,
/// where `E G²` and `sup G` have closed forms.
pub fn analytic_moment_constants(model: &ChainModel) -> Option<MomentConstants> {
    if model.dimension() != 1 {
        return None;
    }
    let (v1, b1) = bounded_g_second_moment(model, true)?;
    let (v2, b2) = bounded_g_second_moment(model, false)?;
    Some(MomentConstants { m: b1.max(b2) / 3.0, v1, v2, k_max: u32::MAX, method: MomentMethod::Analytic })
}

fn bounded_g_second_moment(model: &ChainModel, init: bool) -> Option<(f64, f64)> {
    let (law, c) = if init { (&model.init, 1.0) } else { (&model.noise, model.noise_c) };
    match &law.family {
        Family::Uniform { halfwidth } => {
            // G(y) = (y² + h²)/2h on [−h, h]: E G² = 7h²/15, sup G = h
            let h = *halfwidth;
            Some((c * c * 7.0 * h * h / 15.0, c * h))
        }
        Family::Discrete { support, probs } => {
            let g: Vec<f64> = support
                .iter()
                .map(|&y| c * support.iter().zip(probs).map(|(s, p)| p * (y - s).abs()).sum::<f64>())
                .collect();
            let second = g.iter().zip(probs).map(|(gi, p)| p * gi * gi).sum();
            let sup = g.iter().zip(probs).filter(|(_, &p)| p > 0.0).fold(0.0f64, |m, (gi, _)| m.max(*gi));
            Some((second, sup))
        }
        Family::Gaussian { .. } => None,
    }
}
