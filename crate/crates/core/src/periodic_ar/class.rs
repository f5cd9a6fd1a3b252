use serde::{Deserialize, Serialize};

use crate::chain::model::operator_norm;
use crate::chain::dist::{advance_counter, MAX_DIMENSION};
use crate::error::{finite, invalid, Error, Result};

/// Default cap on the number of net members.
pub const DEFAULT_NET_CAP: u128 = 10_000_000;

/// Linear predictors `x ↦ Ax` with `‖A‖_op ≤ ρ_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorClass {
    ScalarAr1 { rho_max: f64 },
    Var1 { dimension: usize, rho_max: f64 },
}

impl PredictorClass {
    pub fn validate(&self) -> Result<()> {
        let rho = self.rho_max();
        if !(finite("rho_max", rho)? >= 0.0 && rho < 1.0) {
            return invalid!("rho_max must lie in [0, 1), got {rho}");
        }
        if let PredictorClass::Var1 { dimension, .. } = *self {
            if !(1..=MAX_DIMENSION).contains(&dimension) {
                return invalid!("var1 dimension must lie in 1..={MAX_DIMENSION}, got {dimension}");
            }
        }
        Ok(())
    }

    pub fn rho_max(&self) -> f64 {
        match *self {
            PredictorClass::ScalarAr1 { rho_max } | PredictorClass::Var1 { rho_max, .. } => rho_max,
        }
    }

    pub fn dimension(&self) -> usize {
        match *self {
            PredictorClass::ScalarAr1 { .. } => 1,
            PredictorClass::Var1 { dimension, .. } => dimension,
        }
    }

    /// `log` of the analytic bound on the covering number:
    /// `1 + 2/ε` (scalar) or `(1 + 2√d/ε)^d` (var1).
    pub fn log_covering_bound(&self, epsilon: f64) -> f64 {
        match *self {
            PredictorClass::ScalarAr1 { .. } => (2.0 / epsilon).ln_1p(),
            PredictorClass::Var1 { dimension, .. } => {
                let d = dimension as f64;
                d * (2.0 * d.sqrt() / epsilon).ln_1p()
            }
        }
    }
}

/// A finite `ε`-net of a predictor class, members in lexicographic order.
///
/// Each member is a row-major `d × d` coefficient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringNet {
    pub epsilon: f64,
    pub dimension: usize,
    pub members: Vec<Vec<f64>>,
}

impl CoveringNet {
    pub fn cardinality(&self) -> usize {
        self.members.len()
    }

    /// A net with explicitly listed members (no covering guarantee).
    pub fn from_members(epsilon: f64, dimension: usize, mut members: Vec<Vec<f64>>) -> Result<Self> {
        if members.is_empty() {
            return invalid!("net has no members");
        }
        for m in &members {
            if m.len() != dimension * dimension {
                return invalid!("net member has {} entries, expected {}", m.len(), dimension * dimension);
            }
            for &v in m {
                finite("net member", v)?;
            }
        }
        members.sort_by(|a, b| a.partial_cmp(b).expect("finite members"));
        members.dedup();
        Ok(CoveringNet { epsilon, dimension, members })
    }
}

/// `⌊ρ/h⌋`, tolerant of the rounding in `ρ/h` when the ratio is integral.
fn grid_radius(rho: f64, h: f64) -> u64 {
    let ratio = rho / h;
    (ratio + 1e-9 * ratio.max(1.0)).floor() as u64
}

pub fn build_net(class: &PredictorClass, epsilon: f64) -> Result<CoveringNet> {
    build_net_with_cap(class, epsilon, DEFAULT_NET_CAP)
}

/// Scalar: `{iε : |i| ≤ ⌊ρ/ε⌋}`. Var1: matrices with entries in
/// `(ε/√d)·{0, ±1, …, ±⌊ρ√d/ε⌋}` and operator norm at most `ρ`.
pub fn build_net_with_cap(class: &PredictorClass, epsilon: f64, cap: u128) -> Result<CoveringNet> {
    class.validate()?;
    if !(finite("epsilon", epsilon)? > 0.0) {
        return invalid!("epsilon must be > 0, got {epsilon}");
    }
    let rho = class.rho_max();
    match *class {
        PredictorClass::ScalarAr1 { .. } => {
            let k = grid_radius(rho, epsilon);
            let size = 2 * k as u128 + 1;
            if size > cap {
                return Err(Error::TooLarge { what: "covering net", size, cap });
            }
            let k = k as i64;
            let members = (-k..=k).map(|i| vec![i as f64 * epsilon]).collect();
            Ok(CoveringNet { epsilon, dimension: 1, members })
        }
        PredictorClass::Var1 { dimension: d, .. } => {
            let h = epsilon / (d as f64).sqrt();
            let k = grid_radius(rho, h);
            let radix = 2 * k as u128 + 1;
            let entries = (d * d) as u32;
            let size = radix.checked_pow(entries).unwrap_or(u128::MAX);
            if size > cap {
                return Err(Error::TooLarge { what: "covering net candidates", size, cap });
            }
            let radix = radix as usize;
            let mut idx = vec![0usize; d * d];
            let mut members = Vec::new();
            let tol = 1e-12 * rho.max(1e-300);
            loop {
                let a: Vec<f64> = idx.iter().map(|&i| (i as f64 - k as f64) * h).collect();
                if operator_norm(&a, d) <= rho + tol {
                    members.push(a);
                }
                if !advance_counter(&mut idx, radix) {
                    break;
                }
            }
            Ok(CoveringNet { epsilon, dimension: d, members })
        }
    }
}

/// `H(F, ε) = 1 ∨ log N(F, ε)` evaluated at the analytic covering bound.
pub fn entropy(class: &PredictorClass, epsilon: f64) -> Result<f64> {
    class.validate()?;
    if !(finite("epsilon", epsilon)? > 0.0) {
        return invalid!("epsilon must be > 0, got {epsilon}");
    }
    Ok(class.log_covering_bound(epsilon).max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_nets() {
        let c = PredictorClass::ScalarAr1 { rho_max: 0.9 };
        let net = build_net(&c, 0.5).unwrap();
        assert_eq!(net.members, vec![vec![-0.5], vec![0.0], vec![0.5]]);
        assert!(net.cardinality() as f64 <= 1.0 + 2.0 / 0.5);
        let net = build_net(&c, 0.01).unwrap();
        assert_eq!(net.cardinality(), 181);
        assert!(net.cardinality() as f64 <= 201.0);
        // ρ/ε = 360 exactly; the floor must not lose the endpoint to rounding
        assert_eq!(build_net(&c, 0.0025).unwrap().cardinality(), 721);
        assert_eq!(build_net(&c, 0.95).unwrap().members, vec![vec![0.0]]);
        assert_eq!(build_net(&c, 0.9).unwrap().cardinality(), 3);
        assert_eq!(build_net(&c, 5.0).unwrap().cardinality(), 1);
        assert!(build_net(&c, 0.0).is_err());
        assert!(matches!(build_net_with_cap(&c, 1e-3, 100), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn scalar_net_covers_class() {
        let c = PredictorClass::ScalarAr1 { rho_max: 0.73 };
        for eps in [0.05, 0.1, 0.3] {
            let net = build_net(&c, eps).unwrap();
            for i in 0..=1000 {
                let a = -0.73 + 1.46 * i as f64 / 1000.0;
                let gap = net.members.iter().map(|m| (m[0] - a).abs()).fold(f64::INFINITY, f64::min);
                assert!(gap <= eps + 1e-12);
            }
        }
    }

    #[test]
    fn var1_nets() {
        let c = PredictorClass::Var1 { dimension: 2, rho_max: 0.5 };
        let net = build_net(&c, 0.25).unwrap();
        // entries in (0.25/√2)·{−2..2}; only the lattice radius grows with d
        assert!(net.members.iter().all(|a| operator_norm(a, 2) <= 0.5 + 1e-12));
        assert!(net.members.contains(&vec![0.0; 4]));
        let bound_entries = (1.0 + 2.0 * 2f64.sqrt() / 0.25).powi(4);
        assert!((net.cardinality() as f64) <= bound_entries);
        let sorted = net.members.windows(2).all(|w| w[0] < w[1]);
        assert!(sorted);
        assert_eq!(build_net(&c, 1.0).unwrap().members, vec![vec![0.0; 4]]);
    }

    #[test]
    fn var1_in_dimension_one_matches_scalar() {
        let a = build_net(&PredictorClass::Var1 { dimension: 1, rho_max: 0.6 }, 0.1).unwrap();
        let b = build_net(&PredictorClass::ScalarAr1 { rho_max: 0.6 }, 0.1).unwrap();
        assert_eq!(a.members, b.members);
    }

    #[test]
    fn entropy_values() {
        let s = PredictorClass::ScalarAr1 { rho_max: 0.9 };
        assert_eq!(entropy(&s, 2.0).unwrap(), 1.0);
        assert!((entropy(&s, 0.01).unwrap() - 5.303_304_908_059_076).abs() < 1e-14);
        let v = PredictorClass::Var1 { dimension: 2, rho_max: 0.9 };
        // 2·log(1 + 20√2), mpmath
        assert!((entropy(&v, 0.1).unwrap() - 6.754_101_108_784_314).abs() < 1e-13);
        assert!(PredictorClass::ScalarAr1 { rho_max: 1.0 }.validate().is_err());
    }
}
