//! Small numerical helpers: normal mean absolute deviation, the
//! Kummer function used for Gaussian norms, golden-section search and
//! Gauss–Legendre quadrature.

use std::f64::consts::{FRAC_2_SQRT_PI, SQRT_2};

/// `E|y − σZ|` for standard normal `Z`.
///
/// `σ√(2/π)·exp(−y²/2σ²) + y·(1 − 2Φ(−y/σ))`, with `Φ(−z) = erfc(z/√2)/2`.
pub fn normal_mean_abs_dev(y: f64, sigma: f64) -> f64 {
    let z = y / sigma;
    let density_term = sigma * (FRAC_2_SQRT_PI / SQRT_2) * (-0.5 * z * z).exp();
    // 1 − 2Φ(−z) = 1 − erfc(z/√2) = erf(z/√2)
    density_term + y * libm::erf(z / SQRT_2)
}

/// `E‖y − σZ‖₂` for `Z ~ N(0, I_d)`, given `‖y‖₂`.
///
/// This is the mean of a noncentral chi distribution with `d` degrees of
/// freedom: `σ√2·Γ((d+1)/2)/Γ(d/2)·₁F₁(−½; d/2; −λ²/2)`, `λ = ‖y‖/σ`.
/// Kummer's transformation turns the confluent series into one with
/// positive terms.
pub fn gaussian_mean_norm_dev(y_norm: f64, sigma: f64, dim: usize) -> f64 {
    if dim == 1 {
        return normal_mean_abs_dev(y_norm, sigma);
    }
    let d = dim as f64;
    let lambda = y_norm / sigma;
    if lambda > 1e3 {
        // asymptotic expansion, error O(λ⁻³)
        return sigma * (lambda + (d - 1.0) / (2.0 * lambda));
    }
    let scale = SQRT_2 * (libm::lgamma((d + 1.0) / 2.0) - libm::lgamma(d / 2.0)).exp();
    let z = 0.5 * lambda * lambda;
    sigma * scale * kummer_transformed(0.5 * (d + 1.0), 0.5 * d, z)
}

/// `e^{−z}·₁F₁(a; b; z)` for `z ≥ 0` and `a, b > 0`, summed with rescaling.
fn kummer_transformed(a: f64, b: f64, z: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut log_offset = 0.0f64;
    let mut k = 0.0f64;
    loop {
        term *= (a + k) / (b + k) * z / (k + 1.0);
        sum += term;
        k += 1.0;
        if sum > 1e250 {
            sum *= 1e-250;
            term *= 1e-250;
            log_offset += 250.0 * std::f64::consts::LN_10;
        }
        if k > z && term < sum * 1e-17 {
            break;
        }
        if k > 1e7 {
            break;
        }
    }
    (sum.ln() + log_offset - z).exp()
}

/// Maximises a unimodal function on `[lo, hi]` by golden-section search.
///
/// Returns `(argmax, max)`. Stops once the bracket is narrower than `tol`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > tol && iters < 400 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
        iters += 1;
    }
    let mut best = (x1, f1);
    for x in [x2, lo, hi] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    if f2 > best.1 {
        best = (x2, f2);
    }
    best
}

/// 8-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Composite Gauss–Legendre nodes on `[lo, hi]` with `panels` equal panels.
pub fn composite_gl_nodes(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let a = lo + width * p as f64;
        let mid = a + 0.5 * width;
        for &(x, w) in &GAUSS_LEGENDRE_8 {
            nodes.push((mid + 0.5 * width * x, 0.5 * width * w));
        }
    }
    nodes
}
