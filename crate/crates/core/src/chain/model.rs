//! Chain models `X_t = F_t(X_{t-1}, ε_t)` and their simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{InitSpec, Metric, NoiseSpec, MAX_DIMENSION};
use crate::error::{finite, invalid, Error, Result};
use crate::seed::replicate_rng;

const MAX_PERIOD: usize = 1_000_000;
const MAX_TRAJECTORY_LEN: usize = 100_000_000;

/// One per-phase Lipschitz map `f: R → R`, applied coordinate-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseMap {
    /// `a·x`
    Linear { slope: f64 },
    /// `a·tanh(x)`
    Tanh { scale: f64 },
    /// `a·sin(x)`
    Sine { scale: f64 },
    /// `a·clamp(x, −b, b)`
    Clipped { slope: f64, bound: f64 },
}

impl PhaseMap {
    pub fn lipschitz(&self) -> f64 {
        match *self {
            PhaseMap::Linear { slope } | PhaseMap::Clipped { slope, .. } => slope.abs(),
            PhaseMap::Tanh { scale } | PhaseMap::Sine { scale } => scale.abs(),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            PhaseMap::Linear { slope } => slope * x,
            PhaseMap::Tanh { scale } => scale * x.tanh(),
            PhaseMap::Sine { scale } => scale * x.sin(),
            PhaseMap::Clipped { slope, bound } => slope * x.clamp(-bound, bound),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PhaseMap::Linear { slope } => finite("slope", slope).map(drop),
            PhaseMap::Tanh { scale } | PhaseMap::Sine { scale } => finite("scale", scale).map(drop),
            PhaseMap::Clipped { slope, bound } => {
                finite("slope", slope)?;
                if !(finite("bound", bound)? > 0.0) {
                    return invalid!("clipped bound must be > 0");
                }
                Ok(())
            }
        }
    }
}

/// A square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIMENSION || data.len() != dim * dim {
            return invalid!("matrix must be d×d with 1 <= d <= {MAX_DIMENSION}");
        }
        for &v in &data {
            finite("matrix entry", v)?;
        }
        Ok(Matrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `out = A x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (row, o) in self.data.chunks_exact(self.dim).zip(out.iter_mut()) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Spectral norm by power iteration on `AᵀA`.
    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.data, self.dim)
    }
}

/// Spectral norm of a row-major `d×d` matrix; power iteration with 1e-10
/// relative tolerance and at most 1000 iterations.
pub fn operator_norm(a: &[f64], d: usize) -> f64 {
    if a.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    if d == 1 {
        return a[0].abs();
    }
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * i as f64).collect();
    normalize(&mut v);
    let mut av = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut lambda = 0.0f64;
    for _ in 0..1000 {
        for (r, o) in a.chunks_exact(d).zip(av.iter_mut()) {
            *o = r.iter().zip(&v).map(|(x, y)| x * y).sum();
        }
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = (0..d).map(|i| a[i * d + j] * av[i]).sum();
        }
        let next = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if next == 0.0 {
            // start vector in the kernel; fall back to the Frobenius norm
            return a.iter().map(|x| x * x).sum::<f64>().sqrt();
        }
        v.copy_from_slice(&w);
        normalize(&mut v);
        let converged = (next - lambda).abs() <= 1e-10 * next;
        lambda = next;
        if converged {
            break;
        }
    }
    lambda.sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v {
        *x /= n;
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return invalid!("matrix rows must all have length {d}");
        }
        Matrix::new(d, rows.into_iter().flatten().collect())
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.data.chunks_exact(m.dim).map(|r| r.to_vec()).collect()
    }
}

/// The update maps `t ↦ F_t`, each family cycled with its listed period.
///
/// The map used for the transition into `X_t` is entry `(t − 1) mod P`, so
/// entry `j` is paired with phase `j + 1` of the periodic predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UpdateMaps {
    /// `F_t(x, e) = a_t x + e`.
    Ar1 { coeffs: Vec<f64> },
    /// `F_t(x, e) = A_t x + e`.
    Var1 { matrices: Vec<Matrix> },
    /// `F_t(x, e) = f_t(x) + e` with per-phase Lipschitz maps.
    PeriodicFunctional { maps: Vec<PhaseMap> },
}

impl UpdateMaps {
    pub fn period(&self) -> usize {
        match self {
            UpdateMaps::Ar1 { coeffs } => coeffs.len(),
            UpdateMaps::Var1 { matrices } => matrices.len(),
            UpdateMaps::PeriodicFunctional { maps } => maps.len(),
        }
    }

    /// Largest Lipschitz constant over `t` of `x ↦ F_t(x, e)`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            UpdateMaps::Ar1 { coeffs } => coeffs.iter().fold(0.0, |m, a| m.max(a.abs())),
            UpdateMaps::Var1 { matrices } => matrices.iter().fold(0.0, |m, a| m.max(a.operator_norm())),
            UpdateMaps::PeriodicFunctional { maps } => maps.iter().fold(0.0, |m, f| m.max(f.lipschitz())),
        }
    }

    /// Index into the map list for the transition into `X_t` (`t ≥ 1`).
    pub fn slot(&self, t: usize) -> usize {
        (t - 1) % self.period()
    }

    /// `out = f_t(x)` (the noise-free part of `F_t`).
    pub fn drift_into(&self, t: usize, x: &[f64], out: &mut [f64]) {
        let slot = self.slot(t);
        match self {
            UpdateMaps::Ar1 { coeffs } => out[0] = coeffs[slot] * x[0],
            UpdateMaps::Var1 { matrices } => matrices[slot].apply_into(x, out),
            UpdateMaps::PeriodicFunctional { maps } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = maps[slot].apply(xi);
                }
            }
        }
    }
}

/// A nonstationary one-step contracting chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainModel {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(rename = "model")]
    pub maps: UpdateMaps,
    pub noise: NoiseSpec,
    pub init: InitSpec,
    /// Certified contraction coefficient.
    pub rho: f64,
    /// Constant `C` of the noise-Lipschitz condition; 1 for additive maps.
    #[serde(default = "unit")]
    pub noise_c: f64,
    pub metric: Metric,
}

fn default_id() -> String {
    "model".into()
}

fn unit() -> f64 {
    1.0
}

impl ChainModel {
    /// Time-varying AR(1) with Gaussian noise and Gaussian `X₁`.
    pub fn gaussian_ar1(coeffs: Vec<f64>, sigma: f64, init_sigma: f64) -> Self {
        let rho = coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        ChainModel {
            id: "ar1".into(),
            maps: UpdateMaps::Ar1 { coeffs },
            noise: NoiseSpec::gaussian(sigma, 1),
            init: InitSpec::gaussian(init_sigma, 1),
            rho,
            noise_c: 1.0,
            metric: Metric::Abs,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let model: ChainModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn dimension(&self) -> usize {
        match &self.maps {
            UpdateMaps::Ar1 { .. } => 1,
            UpdateMaps::Var1 { matrices } => matrices.first().map_or(0, Matrix::dim),
            UpdateMaps::PeriodicFunctional { .. } => self.noise.dimension,
        }
    }

    /// All maps in this crate are additive in the noise.
    pub fn is_additive(&self) -> bool {
        self.noise_c == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&finite("rho", self.rho)?) {
            return invalid!("rho must lie in [0, 1), got {}", self.rho);
        }
        if self.noise_c != 1.0 {
            return invalid!("additive-noise maps require noise_c = 1, got {}", self.noise_c);
        }
        let period = self.maps.period();
        if period == 0 || period > MAX_PERIOD {
            return invalid!("update map list must have 1..={MAX_PERIOD} entries");
        }
        match &self.maps {
            UpdateMaps::Ar1 { coeffs } => {
                for &a in coeffs {
                    finite("ar1 coefficient", a)?;
                }
            }
            UpdateMaps::Var1 { matrices } => {
                let d = matrices[0].dim();
                if matrices.iter().any(|m| m.dim() != d) {
                    return invalid!("all var1 matrices must share one dimension");
                }
            }
            UpdateMaps::PeriodicFunctional { maps } => {
                for m in maps {
                    m.validate()?;
                }
            }
        }
        self.noise.validate()?;
        self.init.validate()?;
        let d = self.dimension();
        if self.noise.dimension != d || self.init.dimension != d {
            return invalid!(
                "state dimension {d} does not match noise ({}) / init ({}) dimensions",
                self.noise.dimension,
                self.init.dimension
            );
        }
        if self.metric == Metric::Abs && d != 1 {
            return invalid!("metric `abs` requires scalar states; use `euclidean` for dimension {d}");
        }
        let lip = self.maps.lipschitz();
        let tol = match self.maps {
            UpdateMaps::Var1 { .. } => 1e-9 * self.rho.max(1e-300),
            _ => 0.0,
        };
        if lip > self.rho + tol {
            return Err(Error::Invariant(format!(
                "update maps have Lipschitz constant {lip}, above the certified rho {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// `out = F_t(x, e)`.
    pub fn step_into(&self, t: usize, x: &[f64], e: &[f64], out: &mut [f64]) {
        self.maps.drift_into(t, x, out);
        for (o, ei) in out.iter_mut().zip(e) {
            *o += ei;
        }
    }

    /// Runs `n` steps from a fresh `X₁`, calling `visit(t, X_t)` for `t = 1..=n`.
    ///
    /// Draw order: all coordinates of `X₁`, then the coordinates of each
    /// `ε_t` in turn.
    pub fn run_path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, mut visit: impl FnMut(usize, &[f64])) {
        let d = self.dimension();
        let mut x = vec![0.0; d];
        let mut next = vec![0.0; d];
        let mut e = vec![0.0; d];
        self.init.sample_into(rng, &mut x);
        visit(1, &x);
        for t in 2..=n {
            self.noise.sample_into(rng, &mut e);
            self.step_into(t, &x, &e, &mut next);
            std::mem::swap(&mut x, &mut next);
            visit(t, &x);
        }
    }

    /// Like [`run_path`](Self::run_path) but discards the first `burn_in`
    /// states and relabels time so that the visited states are `t = 1..=n`.
    ///
    /// `burn_in` must be a multiple of the map period so that phases line up.
    pub fn run_warm_path<R: Rng + ?Sized>(
        &self,
        n: usize,
        burn_in: usize,
        rng: &mut R,
        mut visit: impl FnMut(usize, &[f64]),
    ) {
        self.run_path(burn_in + n, rng, |t, x| {
            if t > burn_in {
                visit(t - burn_in, x)
            }
        });
    }

    /// `G_ε(y) = C·E δ(y, ε')`.
    pub fn g_eps(&self, y: &[f64]) -> Result<f64> {
        Ok(self.noise_c * self.noise.mean_distance(y, self.metric)?)
    }

    /// `G_{X₁}(x) = E d(x, X₁')`.
    pub fn g_x1(&self, x: &[f64]) -> Result<f64> {
        self.init.mean_distance(x, self.metric)
    }

    /// Upper bound on `E‖X_n‖`: `G_ε(0)/(1−ρ) + ρ^{n−1} G_{X₁}(0)`.
    pub fn expected_norm_bound(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return invalid!("n must be >= 1");
        }
        if !self.is_additive() {
            return invalid!("the moment bound needs additive noise");
        }
        let zero = vec![0.0; self.dimension()];
        let geps = self.g_eps(&zero)?;
        let gx1 = self.g_x1(&zero)?;
        Ok(geps / (1.0 - self.rho) + self.rho.powi((n - 1) as i32) * gx1)
    }
}

/// A simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<f64>,
    pub dim: usize,
    pub model_id: String,
    pub seed: u64,
    pub replicate_index: u64,
}

impl Trajectory {
    /// Builds a trajectory from observed data (no generating model).
    pub fn from_states(states: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || states.is_empty() || states.len() % dim != 0 {
            return invalid!("trajectory needs at least one state of dimension {dim}");
        }
        Ok(Trajectory { states, dim, model_id: "data".into(), seed: 0, replicate_index: 0 })
    }

    pub fn scalar(xs: &[f64]) -> Self {
        Trajectory { states: xs.to_vec(), dim: 1, model_id: "data".into(), seed: 0, replicate_index: 0 }
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `X_t` for `t = 1..=len`.
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[(t - 1) * self.dim..t * self.dim]
    }
}

/// Simulates `n` states; bit-identical for equal `(model, seed, replicate_index)`.
pub fn simulate(model: &ChainModel, n: usize, seed: u64, replicate_index: u64) -> Result<Trajectory> {
    if n == 0 {
        return invalid!("trajectory length must be >= 1");
    }
    if n.saturating_mul(model.dimension()) > MAX_TRAJECTORY_LEN {
        return Err(Error::TooLarge {
            what: "trajectory",
            size: (n * model.dimension()) as u128,
            cap: MAX_TRAJECTORY_LEN as u128,
        });
    }
    model.validate()?;
    let mut rng = replicate_rng(seed, replicate_index);
    let mut states = Vec::with_capacity(n * model.dimension());
    model.run_path(n, &mut rng, |_, x| states.extend_from_slice(x));
    Ok(Trajectory {
        states,
        dim: model.dimension(),
        model_id: model.id.clone(),
        seed,
        replicate_index,
    })
}
