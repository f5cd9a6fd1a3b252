use serde::{Deserialize, Serialize};

use super::{check_rho, clip01, k_rho, k_table};
use crate::error::{finite, invalid, Result};

/// Inputs of the Cramér-condition bound: `E exp(a·G) ≤ K₁` for the initial
/// law and `≤ K₂` for the noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CramerInputs {
    pub n: usize,
    pub rho: f64,
    pub a: f64,
    pub k1: f64,
    pub k2: f64,
}

impl CramerInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid!("n must be >= 1");
        }
        check_rho(finite("rho", self.rho)?)?;
        if !(finite("a", self.a)? > 0.0) {
            return invalid!("a must be > 0, got {}", self.a);
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2)] {
            if !(finite(name, v)? >= 1.0) {
                return invalid!("{name} must be >= 1, got {v}");
            }
        }
        Ok(())
    }

    /// `δ = a / K_{n−1}(ρ)`.
    pub fn delta(&self) -> f64 {
        self.a / k_rho(self.n - 1, self.rho).unwrap_or(f64::NAN)
    }

    /// `K = (2/e²)(K₁ + K₂ Σ_{i=2}^n (K_{n−i}/K_{n−1})²)`.
    pub fn k_const(&self) -> f64 {
        let ks = k_table(self.n, self.rho);
        let last = ks[self.n - 1];
        let sum: f64 = ks[..self.n - 1].iter().map(|k| (k / last) * (k / last)).sum();
        2.0 * (-2.0f64).exp() * (self.k1 + self.k2 * sum)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CramerTail {
    pub refined: f64,
    pub loose: f64,
}

/// `P(±S_n ≥ x)`: refined `exp(−(xδ)²/(2K(1 + √(1 + xδ/K)) + xδ))` and loose
/// `exp(−(xδ)²/(4K + 2xδ))`.
pub fn cramer_bound(inputs: &CramerInputs, x: f64) -> Result<CramerTail> {
    inputs.validate()?;
    if !(finite("x", x)? >= 0.0) {
        return invalid!("x must be >= 0, got {x}");
    }
    let k = inputs.k_const();
    let xd = x * inputs.delta();
    let refined = (-(xd * xd) / (2.0 * k * (1.0 + (1.0 + xd / k).sqrt()) + xd)).exp();
    let loose = (-(xd * xd) / (4.0 * k + 2.0 * xd)).exp();
    Ok(CramerTail { refined: clip01(refined), loose: clip01(loose) })
}

/// `E e^{±sS_n} ≤ exp(s²Kδ⁻²/(1 − s/δ))` for `0 ≤ s < δ`.
pub fn cramer_mgf_bound(inputs: &CramerInputs, s: f64) -> Result<f64> {
    inputs.validate()?;
    let delta = inputs.delta();
    if !(finite("s", s)? >= 0.0 && s < delta) {
        return invalid!("s must lie in [0, δ) = [0, {delta}), got {s}");
    }
    Ok((s * s * inputs.k_const() / (delta * delta) / (1.0 - s / delta)).exp())
}

/// Chernoff exponent `−sx + s²Kδ⁻²/(1 − s/δ)`.
pub fn cramer_exponent(inputs: &CramerInputs, s: f64, x: f64) -> Result<f64> {
    Ok(cramer_mgf_bound(inputs, s)?.ln() - s * x)
}

/// Minimiser of the Chernoff exponent:
/// `s(x) = (xδ²/K)/(xδ/K + 1 + √(1 + xδ/K))`.
pub fn cramer_optimal_s(inputs: &CramerInputs, x: f64) -> Result<f64> {
    inputs.validate()?;
    if !(finite("x", x)? >= 0.0) {
        return invalid!("x must be >= 0, got {x}");
    }
    let k = inputs.k_const();
    let delta = inputs.delta();
    let r = x * delta / k;
    Ok((x * delta * delta / k) / (r + 1.0 + (1.0 + r).sqrt()))
}
