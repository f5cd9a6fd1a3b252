//! Closed-form tail bounds for `S_n = f(X₁..X_n) − E f` on contracting
//! chains.
//!
//! Every bound is driven by the geometric constants
//! `K_t(ρ) = (1 − ρ^{t+1})/(1 − ρ)`, which weight how far a perturbation of
//! `X_{n−t}` can propagate to the end of the chain. All tail values are
//! clipped to `[0, 1]`.

mod bernstein;
mod cramer;
mod rio;

pub use bernstein::{bernstein_mgf_bound, bernstein_tail, invert_bernstein, v_n, BernsteinInputs, TailBound};
pub use cramer::{cramer_bound, cramer_exponent, cramer_mgf_bound, cramer_optimal_s, CramerInputs, CramerTail};
pub use rio::{
    ell, ell_star, ell_star_with_tolerance, mcdiarmid_constants, rio_mgf_bound, rio_tail, rio_uniform_tail,
    McDiarmidConstants, McDiarmidInputs, RioTail,
};

use crate::error::{invalid, Result};

/// Largest admissible `ρ`; closer to 1 the geometric sums lose precision.
pub const RHO_MAX: f64 = 1.0 - 1e-9;

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=RHO_MAX).contains(&rho) {
        return invalid!("rho must lie in [0, {RHO_MAX}], got {rho}");
    }
    Ok(())
}

/// `K_t(ρ) = (1 − ρ^{t+1})/(1 − ρ)`; equal to 1 for all `t` at `ρ = 0`.
pub fn k_rho(t: usize, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if rho == 0.0 {
        return Ok(1.0);
    }
    let p = match i32::try_from(t + 1) {
        Ok(e) => rho.powi(e),
        Err(_) => rho.powf((t + 1) as f64),
    };
    Ok((1.0 - p) / (1.0 - rho))
}

/// `[K_0(ρ), …, K_{len−1}(ρ)]`.
pub(crate) fn k_table(len: usize, rho: f64) -> Vec<f64> {
    (0..len).map(|t| k_rho(t, rho).unwrap_or(f64::NAN)).collect()
}

pub(crate) fn clip01(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    x.clamp(0.0, 1.0)
}
