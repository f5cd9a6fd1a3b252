//! Laws of the noise `ε_t` and of the initial state `X₁`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{finite, invalid, Error, Result};
use crate::special::{composite_gl_nodes, gaussian_mean_norm_dev, normal_mean_abs_dev};

/// Largest state dimension accepted anywhere.
pub const MAX_DIMENSION: usize = 64;
const MAX_DISCRETE_SUPPORT: usize = 4096;
const MAX_PRODUCT_SUPPORT: u128 = 1_000_000;

/// Metric on the state space (and on the noise space for additive models).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `|x − x'|`, scalar states only.
    Abs,
    /// `‖x − x'‖₂`.
    Euclidean,
}

impl Metric {
    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            Metric::Abs => x.iter().map(|v| v.abs()).sum(),
            Metric::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Abs => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// The family of a coordinate law; coordinates are i.i.d. when `dimension > 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Gaussian { sigma: f64 },
    Uniform { halfwidth: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
}

/// A centred product law on `R^dimension`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpecRepr", into = "LawSpecRepr")]
pub struct LawSpec {
    pub family: Family,
    pub dimension: usize,
}

/// Law of the noise `ε_t`.
pub type NoiseSpec = LawSpec;
/// Law of the initial state `X₁`.
pub type InitSpec = LawSpec;

impl LawSpec {
    pub fn gaussian(sigma: f64, dimension: usize) -> Self {
        LawSpec { family: Family::Gaussian { sigma }, dimension }
    }

    pub fn uniform(halfwidth: f64, dimension: usize) -> Self {
        LawSpec { family: Family::Uniform { halfwidth }, dimension }
    }

    pub fn discrete(support: Vec<f64>, probs: Vec<f64>) -> Self {
        LawSpec { family: Family::Discrete { support, probs }, dimension: 1 }
    }

    pub fn point_mass(at: f64, dimension: usize) -> Self {
        LawSpec { family: Family::Discrete { support: vec![at], probs: vec![1.0] }, dimension }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.dimension > MAX_DIMENSION {
            return invalid!("dimension must be in 1..={MAX_DIMENSION}, got {}", self.dimension);
        }
        match &self.family {
            Family::Gaussian { sigma } => {
                if !(finite("sigma", *sigma)? > 0.0) {
                    return invalid!("gaussian sigma must be > 0, got {sigma}");
                }
            }
            Family::Uniform { halfwidth } => {
                if !(finite("halfwidth", *halfwidth)? > 0.0) {
                    return invalid!("uniform halfwidth must be > 0, got {halfwidth}");
                }
            }
            Family::Discrete { support, probs } => {
                if support.is_empty() {
                    return invalid!("discrete support must be non-empty");
                }
                if support.len() > MAX_DISCRETE_SUPPORT {
                    return invalid!("discrete support larger than {MAX_DISCRETE_SUPPORT}");
                }
                if support.len() != probs.len() {
                    return invalid!(
                        "discrete support has {} values but {} probabilities",
                        support.len(),
                        probs.len()
                    );
                }
                for &s in support {
                    finite("support value", s)?;
                }
                for &p in probs {
                    if !(finite("probability", p)? >= 0.0) {
                        return invalid!("probabilities must be >= 0, got {p}");
                    }
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return invalid!("probabilities must sum to 1 within 1e-12, got {total}");
                }
            }
        }
        Ok(())
    }

    /// Draws one vector into `out` (length `dimension`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.family {
            Family::Gaussian { sigma } => {
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = sigma * z;
                }
            }
            Family::Uniform { halfwidth } => {
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    *v = halfwidth * (2.0 * u - 1.0);
                }
            }
            Family::Discrete { support, probs } => {
                for v in out.iter_mut() {
                    *v = support[pick_index(probs, rng.random())];
                }
            }
        }
    }

    /// `E d(y, Y)` for `Y` drawn from this law.
    ///
    /// Closed forms for Gaussian (all dimensions), uniform (scalar) and
    /// discrete laws; product Gauss–Legendre quadrature for the uniform cube
    /// in dimensions 2 and 3.
    pub fn mean_distance(&self, y: &[f64], metric: Metric) -> Result<f64> {
        if y.len() != self.dimension {
            return invalid!("point has dimension {}, law has {}", y.len(), self.dimension);
        }
        let d = self.dimension;
        if d == 1 || metric == Metric::Abs {
            // scalar, or an ℓ1 metric: sum of coordinate-wise mean deviations
            return Ok(y.iter().map(|&c| self.scalar_mean_abs_dev(c)).sum());
        }
        match &self.family {
            Family::Gaussian { sigma } => Ok(gaussian_mean_norm_dev(metric.norm(y), *sigma, d)),
            Family::Uniform { halfwidth } => uniform_cube_mean_norm(y, *halfwidth),
            Family::Discrete { support, probs } => {
                let size = (support.len() as u128).saturating_pow(d as u32);
                if size > MAX_PRODUCT_SUPPORT {
                    return Err(Error::TooLarge {
                        what: "discrete product support",
                        size,
                        cap: MAX_PRODUCT_SUPPORT,
                    });
                }
                let mut idx = vec![0usize; d];
                let mut point = vec![0.0; d];
                let mut total = 0.0;
                loop {
                    let mut p = 1.0;
                    for (k, &i) in idx.iter().enumerate() {
                        point[k] = support[i];
                        p *= probs[i];
                    }
                    total += p * metric.distance(y, &point);
                    if !advance_counter(&mut idx, support.len()) {
                        break;
                    }
                }
                Ok(total)
            }
        }
    }

    fn scalar_mean_abs_dev(&self, y: f64) -> f64 {
        match &self.family {
            Family::Gaussian { sigma } => normal_mean_abs_dev(y, *sigma),
            Family::Uniform { halfwidth } => {
                let h = *halfwidth;
                if y.abs() <= h {
                    (y * y + h * h) / (2.0 * h)
                } else {
                    y.abs()
                }
            }
            Family::Discrete { support, probs } => {
                support.iter().zip(probs).map(|(s, p)| p * (y - s).abs()).sum()
            }
        }
    }

    /// `sup d(Y, Y')` over two independent draws, `None` when unbounded.
    pub fn diameter(&self, metric: Metric) -> Option<f64> {
        let coord = match &self.family {
            Family::Gaussian { .. } => return None,
            Family::Uniform { halfwidth } => 2.0 * halfwidth,
            Family::Discrete { support, probs } => {
                let live = support.iter().zip(probs).filter(|(_, &p)| p > 0.0).map(|(s, _)| *s);
                let (lo, hi) = live.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s), hi.max(s))
                });
                hi - lo
            }
        };
        let d = self.dimension as f64;
        Some(match metric {
            Metric::Abs => coord * d,
            Metric::Euclidean => coord * d.sqrt(),
        })
    }

    /// Finite support as `(value, prob)` pairs for scalar discrete laws.
    pub fn finite_support(&self) -> Option<Vec<(f64, f64)>> {
        match (&self.family, self.dimension) {
            (Family::Discrete { support, probs }, 1) => {
                Some(support.iter().copied().zip(probs.iter().copied()).collect())
            }
            _ => None,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(&self.family, Family::Discrete { probs, .. } if probs.iter().filter(|&&p| p > 0.0).count() == 1)
    }
}

/// Index drawn by inversion from cumulative probabilities.
pub(crate) fn pick_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last cumulative value
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Mixed-radix increment; returns false after the last combination.
pub(crate) fn advance_counter(idx: &mut [usize], radix: usize) -> bool {
    for digit in idx.iter_mut().rev() {
        *digit += 1;
        if *digit < radix {
            return true;
        }
        *digit = 0;
    }
    false
}

fn uniform_cube_mean_norm(y: &[f64], h: f64) -> Result<f64> {
    let d = y.len();
    let panels = match d {
        2 => 8,
        3 => 4,
        _ => return invalid!("uniform euclidean mean distance only supported for dimension <= 3"),
    };
    let nodes = composite_gl_nodes(-h, h, panels);
    let vol = (2.0 * h).powi(d as i32);
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        let mut sq = 0.0;
        for (k, &i) in idx.iter().enumerate() {
            let (x, wi) = nodes[i];
            w *= wi;
            sq += (y[k] - x) * (y[k] - x);
        }
        total += w * sq.sqrt();
        if !advance_counter(&mut idx, nodes.len()) {
            break;
        }
    }
    Ok(total / vol)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawSpecRepr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    halfwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
    #[serde(default = "one")]
    dimension: usize,
}

fn one() -> usize {
    1
}

impl TryFrom<LawSpecRepr> for LawSpec {
    type Error = Error;

    fn try_from(r: LawSpecRepr) -> Result<Self> {
        let only = |fields: &[(&str, bool)]| -> Result<()> {
            for (name, present) in fields {
                if *present {
                    return invalid!("field `{name}` is not valid for family `{}`", r.family);
                }
            }
            Ok(())
        };
        let family = match r.family.as_str() {
            "gaussian" => {
                only(&[("halfwidth", r.halfwidth.is_some()), ("support", r.support.is_some()), ("probs", r.probs.is_some())])?;
                Family::Gaussian { sigma: r.sigma.ok_or_else(|| Error::InvalidInput("gaussian needs `sigma`".into()))? }
            }
            "uniform" => {
                only(&[("sigma", r.sigma.is_some()), ("support", r.support.is_some()), ("probs", r.probs.is_some())])?;
                Family::Uniform {
                    halfwidth: r.halfwidth.ok_or_else(|| Error::InvalidInput("uniform needs `halfwidth`".into()))?,
                }
            }
            "discrete" => {
                only(&[("sigma", r.sigma.is_some()), ("halfwidth", r.halfwidth.is_some())])?;
                Family::Discrete {
                    support: r.support.ok_or_else(|| Error::InvalidInput("discrete needs `support`".into()))?,
                    probs: r.probs.ok_or_else(|| Error::InvalidInput("discrete needs `probs`".into()))?,
                }
            }
            other => return invalid!("unknown family `{other}` (expected gaussian, uniform or discrete)"),
        };
        let spec = LawSpec { family, dimension: r.dimension };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<LawSpec> for LawSpecRepr {
    fn from(s: LawSpec) -> Self {
        let mut r = LawSpecRepr {
            family: String::new(),
            sigma: None,
            halfwidth: None,
            support: None,
            probs: None,
            dimension: s.dimension,
        };
        match s.family {
            Family::Gaussian { sigma } => {
                r.family = "gaussian".into();
                r.sigma = Some(sigma);
            }
            Family::Uniform { halfwidth } => {
                r.family = "uniform".into();
                r.halfwidth = Some(halfwidth);
            }
            Family::Discrete { support, probs } => {
                r.family = "discrete".into();
                r.support = Some(support);
                r.probs = Some(probs);
            }
        }
        r
    }
}
