use serde::{Deserialize, Serialize};

use super::{check_rho, clip01, k_rho, k_table};
use crate::error::{finite, invalid, Result};

/// Inputs of the Bernstein bound.
///
/// `m` may be 0: the moment condition then forces the dominating variables
/// to vanish and every bound takes its `δ = 0` limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernsteinInputs {
    pub n: usize,
    pub rho: f64,
    pub m: f64,
    pub v1: f64,
    pub v2: f64,
}

impl BernsteinInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid!("n must be >= 1");
        }
        check_rho(finite("rho", self.rho)?)?;
        for (name, v) in [("m", self.m), ("v1", self.v1), ("v2", self.v2)] {
            if !(finite(name, v)? >= 0.0) {
                return invalid!("{name} must be >= 0, got {v}");
            }
        }
        Ok(())
    }

    /// Scale parameter `δ = M·K_{n−1}(ρ)`.
    pub fn delta(&self) -> f64 {
        self.m * k_rho(self.n - 1, self.rho).unwrap_or(f64::NAN)
    }

    /// Variance proxy `V_(n)`.
    pub fn v_n(&self) -> f64 {
        let ks = k_table(self.n, self.rho);
        let head = self.v1 * ks[self.n - 1] * ks[self.n - 1];
        // Σ_{k=2}^n K_{n−k}² = Σ_{j=0}^{n−2} K_j²
        let tail: f64 = ks[..self.n - 1].iter().map(|k| k * k).sum();
        head + self.v2 * tail
    }
}

/// `V_(n) = V₁·K_{n−1}(ρ)² + V₂·Σ_{k=2}^n K_{n−k}(ρ)²`.
pub fn v_n(inputs: &BernsteinInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.v_n())
}

/// `E e^{±sS_n} ≤ exp(s²V_(n) / (2(1 − sδ)))` for `0 ≤ s < 1/δ`.
pub fn bernstein_mgf_bound(inputs: &BernsteinInputs, s: f64) -> Result<f64> {
    inputs.validate()?;
    let delta = inputs.delta();
    if !(finite("s", s)? >= 0.0) || s * delta >= 1.0 {
        return invalid!("s must lie in [0, 1/δ) = [0, {}), got {s}", 1.0 / delta);
    }
    Ok((s * s * inputs.v_n() / (2.0 * (1.0 - s * delta))).exp())
}

/// A tail value together with a flag for the `V_(n) = 0` limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub value: f64,
    pub degenerate: bool,
}

/// One-sided Bernstein tail `P(±S_n ≥ x)`.
///
/// `refined`: `exp(−x² / (V(1 + √(1 + 2xδ/V)) + xδ))`; otherwise
/// `exp(−x² / (2(V + xδ)))`. With `V_(n) = 0` the refined form returns the
/// simple-form limit `exp(−x/(2δ))` and sets `degenerate`.
pub fn bernstein_tail(inputs: &BernsteinInputs, x: f64, refined: bool) -> Result<TailBound> {
    inputs.validate()?;
    if !(finite("x", x)? >= 0.0) {
        return invalid!("x must be >= 0, got {x}");
    }
    if x == 0.0 {
        return Ok(TailBound { value: 1.0, degenerate: false });
    }
    let v = inputs.v_n();
    let delta = inputs.delta();
    let simple = |x: f64| {
        let denom = 2.0 * (v + x * delta);
        if denom == 0.0 {
            0.0
        } else {
            (-x * x / denom).exp()
        }
    };
    if !refined {
        return Ok(TailBound { value: clip01(simple(x)), degenerate: false });
    }
    if v == 0.0 {
        return Ok(TailBound { value: clip01(simple(x)), degenerate: true });
    }
    let denom = v * (1.0 + (1.0 + 2.0 * x * delta / v).sqrt()) + x * delta;
    Ok(TailBound { value: clip01((-x * x / denom).exp()), degenerate: false })
}

/// Solves `exp(−x²/(2(V + xδ))) = η`: `x = δℓ + √(δ²ℓ² + 2ℓV)`, `ℓ = ln(1/η)`.
pub fn invert_bernstein(inputs: &BernsteinInputs, eta: f64) -> Result<f64> {
    inputs.validate()?;
    if !(finite("eta", eta)? > 0.0 && eta <= 1.0) {
        return invalid!("eta must lie in (0, 1], got {eta}");
    }
    let l = -eta.ln();
    let v = inputs.v_n();
    let delta = inputs.delta();
    Ok(delta * l + (delta * delta * l * l + 2.0 * l * v).sqrt())
}
