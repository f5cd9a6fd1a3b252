use serde::{Deserialize, Serialize};

use super::{check_rho, clip01, k_table};
use crate::error::{finite, invalid, Result};
use crate::special::golden_section_max;

/// Bounded-difference constants: `M_k` bounds the oscillation contributed by
/// the `k`-th innovation (`k = 1` is the initial state).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDiarmidInputs {
    pub n: usize,
    pub rho: f64,
    pub m_k: Vec<f64>,
}

impl McDiarmidInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid!("n must be >= 1");
        }
        check_rho(finite("rho", self.rho)?)?;
        if self.m_k.len() != self.n {
            return invalid!("m_k has {} entries, expected n = {}", self.m_k.len(), self.n);
        }
        for (k, &m) in self.m_k.iter().enumerate() {
            if !(finite("m_k", m)? > 0.0) {
                return invalid!("m_k[{}] must be > 0, got {m}", k + 1);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McDiarmidConstants {
    /// `M² = Σ_k (K_{n−k} M_k)²`
    pub m2: f64,
    /// `D = Σ_k K_{n−k} M_k`
    pub d: f64,
    /// `Δ = K_{n−1} max_k M_k`
    pub delta_cap: f64,
}

pub fn mcdiarmid_constants(inputs: &McDiarmidInputs) -> Result<McDiarmidConstants> {
    inputs.validate()?;
    let n = inputs.n;
    let ks = k_table(n, inputs.rho);
    let (mut m2, mut d) = (0.0, 0.0);
    for (k, &m) in inputs.m_k.iter().enumerate() {
        let w = ks[n - 1 - k] * m;
        m2 += w * w;
        d += w;
    }
    let max_m = inputs.m_k.iter().cloned().fold(0.0, f64::max);
    Ok(McDiarmidConstants { m2, d, delta_cap: ks[n - 1] * max_m })
}

/// `ln(sinh u / u)`
fn log_sinhc(u: f64) -> f64 {
    if u < 0.25 {
        let u2 = u * u;
        u2 * (1.0 / 6.0
            + u2 * (-1.0 / 180.0
                + u2 * (1.0 / 2835.0 + u2 * (-1.0 / 37800.0 + u2 * (1.0 / 467_775.0 - u2 * 691.0 / 3_831_077_250.0)))))
    } else if u > 20.0 {
        u + (-(-2.0 * u).exp()).ln_1p() - std::f64::consts::LN_2 - u.ln()
    } else {
        (u.sinh() / u).ln()
    }
}

/// `t/(eᵗ − 1) − 1 + t/2`
fn bernoulli_part(t: f64) -> f64 {
    if t < 0.5 {
        let t2 = t * t;
        t2 * (1.0 / 12.0
            + t2 * (-1.0 / 720.0
                + t2 * (1.0 / 30240.0
                    + t2 * (-1.0 / 1_209_600.0
                        + t2 * (1.0 / 47_900_160.0
                            + t2 * (-691.0 / 1_307_674_368_000.0 + t2 / 74_724_249_600.0))))))
    } else {
        t / t.exp_m1() - 1.0 + t / 2.0
    }
}

/// `ℓ(t) = (t − ln t − 1) + t/(eᵗ − 1) + ln(1 − e⁻ᵗ)`, evaluated as
/// `[t/(eᵗ−1) − 1 + t/2] + ln(sinh(t/2)/(t/2))` to avoid cancellation.
pub fn ell(t: f64) -> Result<f64> {
    if !(finite("t", t)? > 0.0) {
        return invalid!("t must be > 0, got {t}");
    }
    Ok(bernoulli_part(t) + log_sinhc(t / 2.0))
}

/// `ℓ*(x) = sup_{t>0} (xt − ℓ(t))` for `x ∈ [0, 1)`.
pub fn ell_star(x: f64) -> Result<f64> {
    ell_star_with_tolerance(x, 1e-12)
}

/// As [`ell_star`], with an explicit bracket tolerance for the search in `t`.
///
/// The maximiser grows like `1/(1 − x)`, so the bracket is
/// `[1e-8, max(50, 100/(1 − x))]`.
pub fn ell_star_with_tolerance(x: f64, tol: f64) -> Result<f64> {
    if !(finite("x", x)? >= 0.0 && x < 1.0) {
        return invalid!("x must lie in [0, 1), got {x}");
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let gap = 1.0 - x;
    let hi = f64::max(50.0, 100.0 / gap);
    // for large t, xt and ℓ(t) nearly cancel; expand around the linear part
    let objective = |t: f64| {
        if t < 1.0 {
            x * t - ell(t).unwrap_or(f64::INFINITY)
        } else {
            1.0 + t.ln() - gap * t - t / t.exp_m1() - (-(-t).exp()).ln_1p()
        }
    };
    let (_, v) = golden_section_max(objective, 1e-8, hi, tol);
    Ok(v.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RioTail {
    /// `exp(−(D²/M²) ℓ*(x/D))`
    pub rio: f64,
    /// `((D − x)/D)^{(2Dx − x²)/M²}`
    pub rio_power: f64,
    /// `exp(−2x²/M²)`
    pub mcdiarmid: f64,
}

fn tail_from(scale: f64, y: f64, x: f64, m2: f64) -> Result<RioTail> {
    let mcdiarmid = clip01((-2.0 * x * x / m2).exp());
    if y >= 1.0 {
        return Ok(RioTail { rio: 0.0, rio_power: 0.0, mcdiarmid });
    }
    let rio = (-scale * ell_star(y)?).exp();
    let rio_power = (scale * (2.0 * y - y * y) * (-y).ln_1p()).exp();
    Ok(RioTail { rio: clip01(rio), rio_power: clip01(rio_power), mcdiarmid })
}

/// `P(±S_n ≥ x)` for `x ∈ [0, D]`.
pub fn rio_tail(inputs: &McDiarmidInputs, x: f64) -> Result<RioTail> {
    let c = mcdiarmid_constants(inputs)?;
    if !(finite("x", x)? >= 0.0 && x <= c.d) {
        return invalid!("x must lie in [0, D] = [0, {}], got {x}", c.d);
    }
    tail_from(c.d * c.d / c.m2, x / c.d, x, c.m2)
}

/// Uniform-constant variant `exp(−nℓ*(x/(nΔ)))` for `x ∈ [0, nΔ]`; the
/// `mcdiarmid` field is `exp(−2x²/(nΔ²))`.
pub fn rio_uniform_tail(inputs: &McDiarmidInputs, x: f64) -> Result<RioTail> {
    let c = mcdiarmid_constants(inputs)?;
    let n = inputs.n as f64;
    let range = n * c.delta_cap;
    if !(finite("x", x)? >= 0.0 && x <= range) {
        return invalid!("x must lie in [0, nΔ] = [0, {range}], got {x}");
    }
    tail_from(n, x / range, x, n * c.delta_cap * c.delta_cap)
}

/// `E e^{±sS_n} ≤ exp((D²/M²) ℓ(M²s/D))` for `s ≥ 0`.
pub fn rio_mgf_bound(inputs: &McDiarmidInputs, s: f64) -> Result<f64> {
    let c = mcdiarmid_constants(inputs)?;
    if !(finite("s", s)? >= 0.0) {
        return invalid!("s must be >= 0, got {s}");
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    Ok((c.d * c.d / c.m2 * ell(c.m2 * s / c.d)?).exp())
}
