use serde::{Deserialize, Serialize};

use crate::error::{finite, invalid, Result};

/// Non-negative `L`-Lipschitz losses of the prediction residual.
///
/// Vector residuals are scored through their Euclidean norm; the quantile
/// loss is asymmetric and therefore scalar only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    /// `|r|`, `L = 1`.
    Absolute,
    /// `r(τ − 1{r < 0})`, `L = max(τ, 1 − τ)`.
    Quantile { tau: f64 },
    /// `r²/2` for `|r| ≤ κ`, else `κ(|r| − κ/2)`; `L = κ`.
    Huber { kappa: f64 },
    /// `r²` for `|r| ≤ B`, continued linearly with slope `2B` beyond, so
    /// `L = 2B` holds everywhere.
    SquaredBounded { range_bound: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Absolute => {}
            LossSpec::Quantile { tau } => {
                if !(finite("tau", tau)? > 0.0 && tau < 1.0) {
                    return invalid!("quantile tau must lie in (0, 1), got {tau}");
                }
            }
            LossSpec::Huber { kappa } => {
                if !(finite("kappa", kappa)? > 0.0) {
                    return invalid!("huber kappa must be > 0, got {kappa}");
                }
            }
            LossSpec::SquaredBounded { range_bound } => {
                if !(finite("range_bound", range_bound)? > 0.0) {
                    return invalid!("squared loss range bound must be > 0, got {range_bound}");
                }
            }
        }
        Ok(())
    }

    /// Rejects losses that are undefined for `dim`-dimensional residuals.
    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        if dim > 1 && matches!(self, LossSpec::Quantile { .. }) {
            return invalid!("the quantile loss needs scalar residuals, got dimension {dim}");
        }
        Ok(())
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            LossSpec::Absolute => 1.0,
            LossSpec::Quantile { tau } => tau.max(1.0 - tau),
            LossSpec::Huber { kappa } => kappa,
            LossSpec::SquaredBounded { range_bound } => 2.0 * range_bound,
        }
    }

    /// Loss of a scalar residual.
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            LossSpec::Absolute => r.abs(),
            LossSpec::Quantile { tau } => {
                if r < 0.0 {
                    (tau - 1.0) * r
                } else {
                    tau * r
                }
            }
            LossSpec::Huber { kappa } => {
                let a = r.abs();
                if a <= kappa {
                    0.5 * r * r
                } else {
                    kappa * (a - 0.5 * kappa)
                }
            }
            LossSpec::SquaredBounded { range_bound: b } => {
                let a = r.abs();
                if a <= b {
                    r * r
                } else {
                    b * b + 2.0 * b * (a - b)
                }
            }
        }
    }

    /// Loss of a residual vector via its norm.
    pub fn eval_vec(&self, r: &[f64]) -> f64 {
        if r.len() == 1 {
            return self.eval(r[0]);
        }
        self.eval(r.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_losses() -> Vec<LossSpec> {
        vec![
            LossSpec::Absolute,
            LossSpec::Quantile { tau: 0.2 },
            LossSpec::Quantile { tau: 0.5 },
            LossSpec::Huber { kappa: 0.7 },
            LossSpec::SquaredBounded { range_bound: 1.5 },
        ]
    }

    #[test]
    fn values() {
        assert_eq!(LossSpec::Absolute.eval(-2.0), 2.0);
        assert_eq!(LossSpec::Quantile { tau: 0.2 }.eval(-1.0), 0.8);
        assert_eq!(LossSpec::Quantile { tau: 0.2 }.eval(1.0), 0.2);
        assert_eq!(LossSpec::Huber { kappa: 1.0 }.eval(0.5), 0.125);
        assert_eq!(LossSpec::Huber { kappa: 1.0 }.eval(-3.0), 2.5);
        assert_eq!(LossSpec::SquaredBounded { range_bound: 1.0 }.eval(0.5), 0.25);
        assert_eq!(LossSpec::SquaredBounded { range_bound: 1.0 }.eval(3.0), 5.0);
        assert_eq!(LossSpec::Absolute.eval_vec(&[3.0, 4.0]), 5.0);
        assert!(LossSpec::Quantile { tau: 0.3 }.check_dimension(2).is_err());
        assert!(LossSpec::Quantile { tau: 1.0 }.validate().is_err());
        assert!(LossSpec::Huber { kappa: 0.0 }.validate().is_err());
    }

    #[test]
    fn lipschitz_constants() {
        let l: Vec<f64> = all_losses().iter().map(LossSpec::lipschitz).collect();
        assert_eq!(l, vec![1.0, 0.8, 0.5, 0.7, 3.0]);
    }

    #[test]
    fn strict_parsing() {
        let l: LossSpec = serde_json::from_str(r#"{"kind":"huber","kappa":2}"#).unwrap();
        assert_eq!(l, LossSpec::Huber { kappa: 2.0 });
        assert!(serde_json::from_str::<LossSpec>(r#"{"kind":"huber","kappa":2,"x":1}"#).is_err());
        assert!(serde_json::from_str::<LossSpec>(r#"{"kind":"squared"}"#).is_err());
    }

    proptest! {
        #[test]
        fn nonnegative_and_lipschitz(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            for loss in all_losses() {
                let (la, lb) = (loss.eval(a), loss.eval(b));
                prop_assert!(la >= 0.0 && lb >= 0.0);
                prop_assert!((la - lb).abs() <= loss.lipschitz() * (a - b).abs() * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
