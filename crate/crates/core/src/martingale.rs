//! Exact martingale decomposition of `S_n` on finite-support chains.
//!
//! With finitely many initial states and noise values the law of
//! `(X₁, …, X_n)` is a finite tree: level `t` holds one node per history
//! `(x₁, …, x_t)`. Conditional expectations `g_k = E[f | F_k]` are computed by
//! backward recursion over that tree, so every quantity in the decomposition
//! is exact up to floating-point summation.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainModel, Family, Metric, UpdateMaps};
use crate::concentration::k_rho;
use crate::error::{finite, invalid, Error, Result};

pub const MAX_HORIZON: usize = 12;
pub const MAX_OUTCOMES: u128 = 1_000_000;
/// Above this many outcomes, path probabilities are accumulated in log space.
const LOG_SPACE_THRESHOLD: u128 = 10_000;
/// Levels with more nodes are thinned to this many for the pairwise check.
const PAIR_CHECK_NODES: usize = 2048;

/// Transition `F_t(x, e)`. The noise enters with Lipschitz constant `C = |noise_scale|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepMap {
    /// `slope·x + noise_scale·e + offset`
    Affine {
        slope: f64,
        #[serde(default = "one")]
        noise_scale: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `tanh(scale·x) + noise_scale·e`
    Tanh {
        scale: f64,
        #[serde(default = "one")]
        noise_scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl StepMap {
    pub fn apply(&self, x: f64, e: f64) -> f64 {
        match *self {
            StepMap::Affine { slope, noise_scale, offset } => slope * x + noise_scale * e + offset,
            StepMap::Tanh { scale, noise_scale } => (scale * x).tanh() + noise_scale * e,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            StepMap::Affine { slope, .. } => slope.abs(),
            StepMap::Tanh { scale, .. } => scale.abs(),
        }
    }

    pub fn noise_scale(&self) -> f64 {
        match *self {
            StepMap::Affine { noise_scale, .. } | StepMap::Tanh { noise_scale, .. } => noise_scale.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        let values: &[(&str, f64)] = match self {
            StepMap::Affine { slope, noise_scale, offset } => {
                &[("slope", *slope), ("noise_scale", *noise_scale), ("offset", *offset)]
            }
            StepMap::Tanh { scale, noise_scale } => &[("scale", *scale), ("noise_scale", *noise_scale)],
        };
        for &(name, v) in values {
            finite(name, v)?;
        }
        Ok(())
    }
}

/// Separately 1-Lipschitz functionals of `(x₁, …, x_n)` under `|·|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `Σ x_i`
    Sum,
    /// `Σ |x_i|`
    SumAbs,
    /// `max_i x_i`
    Max,
    /// `0`
    Constant,
}

impl Functional {
    pub fn eval(&self, xs: &[f64]) -> f64 {
        match self {
            Functional::Sum => xs.iter().sum(),
            Functional::SumAbs => xs.iter().map(|x| x.abs()).sum(),
            Functional::Max => xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Functional::Constant => 0.0,
        }
    }
}

/// A scalar chain whose initial state and noise take finitely many values.
///
/// `maps[j]` is used for the transition into `X_t` with `(t − 2) mod len = j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteChain {
    /// `(state, probability)` pairs.
    pub init_support: Vec<(f64, f64)>,
    /// `(value, probability)` pairs.
    pub noise_support: Vec<(f64, f64)>,
    pub maps: Vec<StepMap>,
    pub n: usize,
    pub rho: f64,
}

fn check_support(name: &str, support: &[(f64, f64)]) -> Result<()> {
    if support.is_empty() {
        return invalid!("{name} is empty");
    }
    let mut total = 0.0;
    for &(v, p) in support {
        finite(name, v)?;
        if !(finite(name, p)? >= 0.0) {
            return invalid!("{name} has negative probability {p}");
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-12 {
        return invalid!("{name} probabilities sum to {total}, expected 1");
    }
    Ok(())
}

impl FiniteChain {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_HORIZON).contains(&self.n) {
            return invalid!("horizon n must lie in 1..={MAX_HORIZON}, got {}", self.n);
        }
        if !(finite("rho", self.rho)? >= 0.0 && self.rho < 1.0) {
            return invalid!("rho must lie in [0, 1), got {}", self.rho);
        }
        check_support("init_support", &self.init_support)?;
        check_support("noise_support", &self.noise_support)?;
        if self.maps.is_empty() && self.n > 1 {
            return invalid!("at least one step map is required when n > 1");
        }
        for map in &self.maps {
            map.validate()?;
            if map.lipschitz() > self.rho {
                return invalid!("step map {map:?} has Lipschitz constant {} > rho = {}", map.lipschitz(), self.rho);
            }
        }
        let count = self.outcome_count();
        if count > MAX_OUTCOMES {
            return Err(Error::TooLarge { what: "outcome count", size: count, cap: MAX_OUTCOMES });
        }
        Ok(())
    }

    /// `|init|·|noise|^{n−1}`.
    pub fn outcome_count(&self) -> u128 {
        let m = self.noise_support.len() as u128;
        let mut count = self.init_support.len() as u128;
        for _ in 1..self.n {
            count = count.saturating_mul(m);
        }
        count
    }

    /// Map driving the transition into `X_t`, `t ≥ 2`.
    pub fn map(&self, t: usize) -> &StepMap {
        &self.maps[(t - 2) % self.maps.len()]
    }

    /// Noise-Lipschitz constant `C`: `|F_t(x, y) − F_t(x, y′)| ≤ C|y − y′|`.
    pub fn noise_c(&self) -> f64 {
        self.maps.iter().map(StepMap::noise_scale).fold(0.0, f64::max)
    }

    /// `G_{X₁}(x) = Σ p_j |x − x_j|`.
    pub fn g_x1(&self, x: f64) -> f64 {
        self.init_support.iter().map(|&(v, p)| p * (x - v).abs()).sum()
    }

    /// `G_ε(y) = C Σ p_j |y − y_j|`.
    pub fn g_eps(&self, y: f64) -> f64 {
        self.noise_c() * self.noise_support.iter().map(|&(v, p)| p * (y - v).abs()).sum::<f64>()
    }

    /// `H_{t,ε}(x, y) = Σ p_j |F_t(x, y) − F_t(x, y_j)|`.
    pub fn h_eps(&self, t: usize, x: f64, y: f64) -> f64 {
        let map = self.map(t);
        let a = map.apply(x, y);
        self.noise_support.iter().map(|&(v, p)| p * (a - map.apply(x, v)).abs()).sum()
    }

    /// Discrete scalar AR(1) models convert exactly.
    pub fn from_chain_model(model: &ChainModel, n: usize) -> Result<Self> {
        model.validate()?;
        let support = |spec: &crate::chain::LawSpec, what: &str| -> Result<Vec<(f64, f64)>> {
            match (&spec.family, spec.dimension) {
                (Family::Discrete { support, probs }, 1) => {
                    Ok(support.iter().cloned().zip(probs.iter().cloned()).collect())
                }
                _ => invalid!("{what} must be a scalar discrete law"),
            }
        };
        let coeffs = match (&model.maps, model.metric) {
            (UpdateMaps::Ar1 { coeffs }, Metric::Abs) => coeffs,
            _ => return invalid!("only scalar ar1 models convert to finite chains"),
        };
        // the model uses coeffs[(t − 1) mod P] for the transition into X_t
        let p = coeffs.len();
        let maps = (0..p)
            .map(|j| StepMap::Affine { slope: coeffs[(j + 1) % p], noise_scale: 1.0, offset: 0.0 })
            .collect();
        let chain = FiniteChain {
            init_support: support(&model.init, "init")?,
            noise_support: support(&model.noise, "noise")?,
            maps,
            n,
            rho: model.rho,
        };
        chain.validate()?;
        Ok(chain)
    }
}

/// Exact decomposition `S_n = Σ d_k` over the history tree.
///
/// Node `j` at level `t ≥ 2` has parent `j / m` at level `t − 1` and noise
/// index `j % m`, where `m` is the noise support size. Level 1 nodes index
/// the initial support.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTable {
    pub n: usize,
    noise_size: usize,
    /// `states[t−1][j]`: value of `x_t` at node `j`.
    pub states: Vec<Vec<f64>>,
    /// `probs[t−1][j]`: probability of the history ending at node `j`.
    pub probs: Vec<Vec<f64>>,
    /// `g[t−1][j] = E[f | history of node j]`.
    pub g: Vec<Vec<f64>>,
    /// `d[t−1][j] = g_t − g_{t−1}` at node `j`.
    pub d: Vec<Vec<f64>>,
    /// `S_n = f − E f` per leaf, computed directly from `f`.
    pub s_n: Vec<f64>,
    pub mean_f: f64,
}

impl DecompositionTable {
    pub fn parent(&self, t: usize, j: usize) -> usize {
        debug_assert!(t >= 2);
        j / self.noise_size
    }

    /// Node index at level `k ≤ t` on the path to node `j` at level `t`.
    pub fn ancestor(&self, t: usize, j: usize, k: usize) -> usize {
        let mut j = j;
        for _ in k..t {
            j /= self.noise_size;
        }
        j
    }

    /// `(x₁, …, x_t)` for node `j` at level `t`.
    pub fn history(&self, t: usize, j: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(t, 0.0);
        let mut idx = j;
        for k in (1..=t).rev() {
            out[k - 1] = self.states[k - 1][idx];
            if k > 1 {
                idx /= self.noise_size;
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.states[self.n - 1].len()
    }
}

pub fn enumerate_decomposition(chain: &FiniteChain, f: Functional) -> Result<DecompositionTable> {
    chain.validate()?;
    let n = chain.n;
    let m = chain.noise_support.len();
    let log_space = chain.outcome_count() > LOG_SPACE_THRESHOLD;

    let mut states = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    states.push(chain.init_support.iter().map(|&(x, _)| x).collect::<Vec<_>>());
    probs.push(chain.init_support.iter().map(|&(_, p)| if log_space { p.ln() } else { p }).collect::<Vec<_>>());
    for t in 2..=n {
        let map = chain.map(t);
        let (prev_x, prev_p) = (&states[t - 2], &probs[t - 2]);
        let mut xs = Vec::with_capacity(prev_x.len() * m);
        let mut ps = Vec::with_capacity(prev_x.len() * m);
        for (&x, &p) in prev_x.iter().zip(prev_p) {
            for &(e, q) in &chain.noise_support {
                xs.push(map.apply(x, e));
                ps.push(if log_space { p + q.ln() } else { p * q });
            }
        }
        states.push(xs);
        probs.push(ps);
    }
    if log_space {
        for level in &mut probs {
            for p in level.iter_mut() {
                *p = p.exp();
            }
        }
    }

    let mut table = DecompositionTable {
        n,
        noise_size: m,
        states,
        probs,
        g: vec![Vec::new(); n],
        d: vec![Vec::new(); n],
        s_n: Vec::new(),
        mean_f: 0.0,
    };

    let leaves = table.leaf_count();
    let mut hist = Vec::with_capacity(n);
    let mut f_leaf = Vec::with_capacity(leaves);
    for j in 0..leaves {
        table.history(n, j, &mut hist);
        f_leaf.push(f.eval(&hist));
    }
    table.g[n - 1] = f_leaf;
    // g_{t−1}(parent) = Σ_e p_e g_t(child)
    for t in (1..n).rev() {
        let child = &table.g[t];
        let parents = table.states[t - 1].len();
        let mut g = vec![0.0; parents];
        for (pj, slot) in g.iter_mut().enumerate() {
            *slot = (0..m).map(|e| chain.noise_support[e].1 * child[pj * m + e]).sum();
        }
        table.g[t - 1] = g;
    }
    let mean_f: f64 = chain.init_support.iter().zip(&table.g[0]).map(|(&(_, p), g)| p * g).sum();
    table.mean_f = mean_f;
    table.d[0] = table.g[0].iter().map(|g| g - mean_f).collect();
    for t in 2..=n {
        table.d[t - 1] = table.g[t - 1].iter().enumerate().map(|(j, g)| g - table.g[t - 2][j / m]).collect();
    }
    table.s_n = table.g[n - 1].iter().map(|leaf| leaf - mean_f).collect();
    Ok(table)
}

/// Slack summary of one inequality at one level `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackRow {
    pub k: usize,
    pub inequality: String,
    /// Number of instances checked.
    pub checked: u64,
    /// Smallest `rhs − lhs`; negative beyond tolerance is a violation.
    #[serde(with = "crate::io::extended_real")]
    pub min_slack: f64,
    #[serde(with = "crate::io::extended_real")]
    pub max_slack: f64,
    pub violations: u64,
}

impl SlackRow {
    fn new(k: usize, inequality: &str) -> Self {
        SlackRow {
            k,
            inequality: inequality.to_string(),
            checked: 0,
            min_slack: f64::INFINITY,
            max_slack: f64::NEG_INFINITY,
            violations: 0,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, tol: f64) {
        let slack = rhs - lhs;
        self.checked += 1;
        self.min_slack = self.min_slack.min(slack);
        self.max_slack = self.max_slack.max(slack);
        if slack < -tol {
            self.violations += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub n: usize,
    pub outcomes: u64,
    pub tolerance: f64,
    /// `max |Σ_k d_k − S_n|` over leaves.
    pub telescoping_error: f64,
    /// `max |E[d_k | F_{k−1}]|` over histories and `k`.
    pub martingale_error: f64,
    /// Whether point 1 compared every pair of nodes at every level.
    pub exhaustive_pairs: bool,
    pub rows: Vec<SlackRow>,
}

impl DecompositionReport {
    pub fn violations(&self) -> u64 {
        self.rows.iter().map(|r| r.violations).sum::<u64>()
            + u64::from(self.telescoping_error > self.tolerance)
            + u64::from(self.martingale_error > self.tolerance)
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "inequality", "checked", "min_slack", "max_slack", "violations"])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.inequality.clone(),
                r.checked.to_string(),
                crate::io::fmt_real(r.min_slack),
                crate::io::fmt_real(r.max_slack),
                r.violations.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Plain-text summary; lists every row with a violation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "horizon n = {}, outcomes = {}, tolerance = {:e}", self.n, self.outcomes, self.tolerance);
        let _ = writeln!(s, "telescoping error = {:e}", self.telescoping_error);
        let _ = writeln!(s, "martingale error = {:e}", self.martingale_error);
        if !self.exhaustive_pairs {
            let _ = writeln!(s, "point 1 checked on thinned node sets");
        }
        for r in self.rows.iter().filter(|r| r.violations > 0) {
            let _ = writeln!(
                s,
                "VIOLATION {} at k = {}: {} of {} instances, min slack {:e}",
                r.inequality, r.k, r.violations, r.checked, r.min_slack
            );
        }
        let _ = writeln!(s, "{}", if self.passed() { "all inequalities hold" } else { "violations found" });
        s
    }
}

/// Checks the three points of the decomposition lemma on every outcome.
pub fn check_lemma1(chain: &FiniteChain, f: Functional) -> Result<DecompositionReport> {
    let table = enumerate_decomposition(chain, f)?;
    let n = chain.n;
    let m = chain.noise_support.len();
    let scale = table.g.iter().flatten().chain(table.states.iter().flatten()).fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-12 * scale;
    let ks: Vec<f64> = (0..n).map(|t| k_rho(t, chain.rho)).collect::<Result<_>>()?;

    let mut telescoping_error = 0.0f64;
    for j in 0..table.leaf_count() {
        let sum: f64 = (1..=n).map(|k| table.d[k - 1][table.ancestor(n, j, k)]).sum();
        telescoping_error = telescoping_error.max((sum - table.s_n[j]).abs());
    }

    let mut martingale_error: f64 =
        chain.init_support.iter().zip(&table.d[0]).map(|(&(_, p), d)| p * d).sum::<f64>().abs();
    for t in 2..=n {
        for pj in 0..table.states[t - 2].len() {
            let e: f64 = (0..m).map(|e| chain.noise_support[e].1 * table.d[t - 1][pj * m + e]).sum();
            martingale_error = martingale_error.max(e.abs());
        }
    }

    let mut rows = Vec::new();
    let mut exhaustive_pairs = true;
    let mut hx = Vec::new();
    for t in 1..=n {
        let mut row = SlackRow::new(t, "point1_lipschitz");
        let count = table.states[t - 1].len();
        let nodes: Vec<usize> = if count <= PAIR_CHECK_NODES {
            (0..count).collect()
        } else {
            exhaustive_pairs = false;
            (0..PAIR_CHECK_NODES).map(|i| i * count / PAIR_CHECK_NODES).collect()
        };
        let histories: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&j| {
                table.history(t, j, &mut hx);
                hx.clone()
            })
            .collect();
        for (a, &ja) in nodes.iter().enumerate() {
            for (b, &jb) in nodes.iter().enumerate().skip(a + 1) {
                let (xa, xb) = (&histories[a], &histories[b]);
                let lhs = (table.g[t - 1][ja] - table.g[t - 1][jb]).abs();
                let head: f64 = (0..t - 1).map(|i| (xa[i] - xb[i]).abs()).sum();
                let rhs = head + ks[n - t] * (xa[t - 1] - xb[t - 1]).abs();
                row.record(lhs, rhs, tol);
            }
        }
        rows.push(row);
    }

    let mut d1 = SlackRow::new(1, "point2_d1");
    for (j, &(x, _)) in chain.init_support.iter().enumerate() {
        d1.record(table.d[0][j].abs(), ks[n - 1] * chain.g_x1(x), tol);
    }
    rows.push(d1);
    for t in 2..=n {
        let mut p2 = SlackRow::new(t, "point2_dt");
        let mut p3h = SlackRow::new(t, "point3_h_le_g");
        let mut p3d = SlackRow::new(t, "point3_dt");
        for (j, &d) in table.d[t - 1].iter().enumerate() {
            let x_prev = table.states[t - 2][j / m];
            let y = chain.noise_support[j % m].0;
            let h = chain.h_eps(t, x_prev, y);
            let g = chain.g_eps(y);
            p2.record(d.abs(), ks[n - t] * h, tol);
            p3h.record(h, g, tol);
            p3d.record(d.abs(), ks[n - t] * g, tol);
        }
        rows.extend([p2, p3h, p3d]);
    }
    Ok(DecompositionReport {
        n,
        outcomes: table.leaf_count() as u64,
        tolerance: tol,
        telescoping_error,
        martingale_error,
        exhaustive_pairs,
        rows,
    })
}

/// Random chain for property checks: `ρ < 0.95`, horizon `≤ max_n`, up to
/// four support points for the initial law and the noise.
pub fn random_finite_chain<R: Rng + ?Sized>(rng: &mut R, max_n: usize) -> FiniteChain {
    let rho = rng.random_range(0.0..0.95);
    let n = rng.random_range(1..=max_n.clamp(1, MAX_HORIZON));
    let support = |rng: &mut R| -> Vec<(f64, f64)> {
        let size = rng.random_range(1..=4usize);
        let weights: Vec<f64> = (0..size).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut out: Vec<(f64, f64)> =
            weights.iter().map(|w| (rng.random_range(-2.0..2.0), w / total)).collect();
        // absorb rounding so the probabilities sum to 1 to within an ulp
        let head: f64 = out[..size - 1].iter().map(|&(_, p)| p).sum();
        out[size - 1].1 = 1.0 - head;
        out
    };
    let init_support = support(rng);
    let noise_support = support(rng);
    let period = rng.random_range(1..=3usize);
    let maps = (0..period)
        .map(|_| {
            let lip = rng.random_range(0.0..=rho);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let noise_scale = rng.random_range(0.5..1.5);
            if rng.random_bool(0.5) {
                StepMap::Affine { slope: sign * lip, noise_scale, offset: rng.random_range(-1.0..1.0) }
            } else {
                StepMap::Tanh { scale: sign * lip, noise_scale }
            }
        })
        .collect();
    FiniteChain { init_support, noise_support, maps, n, rho }
}
