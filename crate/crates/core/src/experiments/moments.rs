use serde::{Deserialize, Serialize};

use super::SIGMA_MARGIN;
use crate::chain::ChainModel;
use crate::error::{invalid, Result};
use crate::io::{csv_string, fmt_real};
use crate::parallel::{map_replicates, mean_stderr};
use crate::seed::replicate_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: usize,
    /// Monte Carlo mean of `‖X_n‖`.
    pub estimate: f64,
    pub stderr: f64,
    /// `G_ε(0)/(1−ρ) + ρ^{n−1} G_{X₁}(0)`
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub rho: f64,
    pub replicates: u64,
    pub base_seed: u64,
    pub rows: Vec<MomentRow>,
    pub passed: bool,
}

impl MomentReport {
    pub fn to_csv(&self) -> Result<String> {
        csv_string(
            &["n", "estimate", "stderr", "bound", "pass"],
            self.rows.iter().map(|r| {
                vec![r.n.to_string(), fmt_real(r.estimate), fmt_real(r.stderr), fmt_real(r.bound), r.pass.to_string()]
            }),
        )
    }
}

/// Estimates `E‖X_n‖` for each `n` in `n_list` from one batch of paths and
/// compares with the moment bound at a 3σ margin.
pub fn check_moment_lemma(model: &ChainModel, n_list: &[usize], replicates: u64, base_seed: u64) -> Result<MomentReport> {
    model.validate()?;
    if !model.is_additive() {
        return invalid!("the moment bound needs additive noise");
    }
    if n_list.is_empty() || n_list.contains(&0) {
        return invalid!("n_list must be non-empty with entries >= 1");
    }
    if replicates < 2 {
        return invalid!("need at least 2 replicates, got {replicates}");
    }
    let max_n = *n_list.iter().max().expect("non-empty");
    if max_n > 10_000_000 {
        return invalid!("n = {max_n} is too large");
    }
    let norms: Vec<Vec<f64>> = map_replicates(0, replicates, |i| {
        let mut rng = replicate_rng(base_seed, i);
        let mut out = vec![0.0; n_list.len()];
        model.run_path(max_n, &mut rng, |t, x| {
            for (slot, &n) in out.iter_mut().zip(n_list) {
                if n == t {
                    *slot = model.metric.norm(x);
                }
            }
        });
        out
    });
    let rows = n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let col: Vec<f64> = norms.iter().map(|r| r[j]).collect();
            let (estimate, stderr) = mean_stderr(&col);
            let bound = model.expected_norm_bound(n)?;
            Ok(MomentRow { n, estimate, stderr, bound, pass: estimate <= bound + SIGMA_MARGIN * stderr })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = rows.iter().all(|r| r.pass);
    Ok(MomentReport { rho: model.rho, replicates, base_seed, rows, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_mean_abs_dev;

    #[test]
    fn rho_zero_matches_noise_mean_norm() {
        let model = ChainModel::gaussian_ar1(vec![0.0], 1.0, 1.0);
        let rep = check_moment_lemma(&model, &[2, 5], 40_000, 1).unwrap();
        assert!(rep.passed);
        let g = normal_mean_abs_dev(0.0, 1.0);
        for row in &rep.rows {
            assert_eq!(row.bound, g);
            assert!((row.estimate - g).abs() < 4.0 * row.stderr, "{row:?}");
        }
    }

    #[test]
    fn first_state_has_init_mean_norm() {
        let model = ChainModel::gaussian_ar1(vec![0.9], 1.0, 2.0);
        let rep = check_moment_lemma(&model, &[1], 40_000, 2).unwrap();
        let row = &rep.rows[0];
        let gx1 = normal_mean_abs_dev(0.0, 2.0);
        assert!((row.estimate - gx1).abs() < 4.0 * row.stderr);
        assert!(row.bound > gx1);
        assert!(rep.passed);
    }

    #[test]
    fn gaussian_chain_passes_at_several_horizons() {
        let model = ChainModel::gaussian_ar1(vec![0.5, -0.5], 1.0, 1.0);
        let rep = check_moment_lemma(&model, &[2, 5, 10, 50], 20_000, 3).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 5, 10, 50]);
        assert!(rep.to_csv().unwrap().starts_with("n,estimate,stderr,bound,pass\n"));
    }

    #[test]
    fn rejections() {
        let model = ChainModel::gaussian_ar1(vec![0.5], 1.0, 1.0);
        assert!(check_moment_lemma(&model, &[], 100, 0).is_err());
        assert!(check_moment_lemma(&model, &[0], 100, 0).is_err());
        assert!(check_moment_lemma(&model, &[1], 1, 0).is_err());
    }
}
