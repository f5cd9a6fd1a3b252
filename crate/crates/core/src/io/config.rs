//! Strict configuration schemas.
//!
//! Every file has the shape
//! `{"base_seed": .., "threads": .., "out": .., "params": {..}}` with only
//! `params` required; unknown keys are rejected at every level.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::concentration::BernsteinInputs;
use crate::error::{finite, invalid, Result};
use crate::experiments::{BoundInputs, RiskCheck, StudyConfig, TailExperiment};
use crate::martingale::{FiniteChain, Functional, MAX_HORIZON};
use crate::periodic_ar::FitSettings;

const MAX_SIM_REPLICATES: u64 = 10_000;
const MAX_SIM_LEN: usize = 10_000_000;
const MAX_BOUND_POINTS: usize = 1_000_000;
const MAX_T: usize = 1_000;
const MAX_RANDOM_CHAINS: usize = 100_000;

/// A parameter block for one subcommand.
pub trait Params: Clone + Send + Serialize + DeserializeOwned {
    const COMMAND: &'static str;
    fn validate(&self) -> Result<()>;
    /// A valid block printed as schema help.
    fn example() -> Self;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig<P> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    /// Worker count, 0 = all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub params: P,
}

impl<P: Params> RunConfig<P> {
    pub fn new(params: P) -> Self {
        RunConfig { base_seed: None, threads: None, out: None, params }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: RunConfig<P> = serde_json::from_str(s)?;
        cfg.params.validate()?;
        Ok(cfg)
    }

    pub fn example_json() -> String {
        serde_json::to_string_pretty(&RunConfig::new(P::example())).expect("examples serialize")
    }
}

/// `simulate`: `replicates` independent trajectories of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub model: ChainModel,
    pub n: usize,
    #[serde(default = "one")]
    pub replicates: u64,
}

fn one() -> u64 {
    1
}

impl Params for SimulateParams {
    const COMMAND: &'static str = "simulate";

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(1..=MAX_SIM_LEN).contains(&self.n) {
            return invalid!("n must lie in 1..={MAX_SIM_LEN}, got {}", self.n);
        }
        if !(1..=MAX_SIM_REPLICATES).contains(&self.replicates) {
            return invalid!("replicates must lie in 1..={MAX_SIM_REPLICATES}, got {}", self.replicates);
        }
        Ok(())
    }

    fn example() -> Self {
        SimulateParams { model: ChainModel::gaussian_ar1(vec![0.8, 0.5, 0.9, -0.7], 1.0, 1.0), n: 400, replicates: 1 }
    }
}

/// `bound`: one tail-bound family evaluated on a grid of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub inputs: BoundInputs,
    pub x: Vec<f64>,
}

impl Params for BoundParams {
    const COMMAND: &'static str = "bound";

    fn validate(&self) -> Result<()> {
        self.inputs.validate()?;
        if self.x.is_empty() || self.x.len() > MAX_BOUND_POINTS {
            return invalid!("x must have 1..={MAX_BOUND_POINTS} entries, got {}", self.x.len());
        }
        for &x in &self.x {
            if !(finite("x", x)? >= 0.0) {
                return invalid!("x must be >= 0, got {x}");
            }
        }
        Ok(())
    }

    fn example() -> Self {
        BoundParams {
            inputs: BoundInputs::Bernstein(BernsteinInputs { n: 100, rho: 0.5, m: 1.0, v1: 1.0, v2: 1.0 }),
            x: vec![0.0, 10.0, 20.0, 40.0],
        }
    }
}

/// `fit-period`: period selection on a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitPeriodParams {
    /// Path of the trajectory CSV; may be given on the command line instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    pub settings: FitSettings,
}

impl Params for FitPeriodParams {
    const COMMAND: &'static str = "fit-period";

    fn validate(&self) -> Result<()> {
        let s = &self.settings;
        s.class.validate()?;
        s.loss.validate()?;
        s.loss.check_dimension(s.class.dimension())?;
        if !(1..=MAX_T).contains(&s.t_max) {
            return invalid!("t_max must lie in 1..={MAX_T}, got {}", s.t_max);
        }
        if let Some(eps) = s.epsilon {
            if !(finite("epsilon", eps)? > 0.0) {
                return invalid!("epsilon must be > 0, got {eps}");
            }
        }
        if let Some(grid) = &s.c_grid {
            grid.points()?;
        }
        Ok(())
    }

    fn example() -> Self {
        use crate::periodic_ar::{LossSpec, PredictorClass};
        FitPeriodParams {
            data: Some("trajectory.csv".into()),
            settings: FitSettings::new(20, PredictorClass::ScalarAr1 { rho_max: 0.9 }, LossSpec::Absolute),
        }
    }
}

impl Params for TailExperiment {
    const COMMAND: &'static str = "validate-bounds";

    fn validate(&self) -> Result<()> {
        TailExperiment::validate(self)
    }

    fn example() -> Self {
        use crate::experiments::{BoundFamily, TailFunctional};
        TailExperiment {
            model: ChainModel::gaussian_ar1(vec![0.5], 1.0, 1.0),
            functional: TailFunctional::CoordinateSum,
            n: 100,
            replicates: 100_000,
            x_grid: None,
            bound_family: BoundFamily::Bernstein,
            bound_inputs: None,
            base_seed: 0,
            k_max: 8,
        }
    }
}

/// Random chains drawn for `verify-lemma1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomChains {
    pub count: usize,
    pub max_n: usize,
}

/// `verify-lemma1`: exhaustive decomposition checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma1Params {
    #[serde(default)]
    pub chains: Vec<FiniteChain>,
    #[serde(default = "default_functional")]
    pub functional: Functional,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomChains>,
}

fn default_functional() -> Functional {
    Functional::Sum
}

impl Default for Lemma1Params {
    fn default() -> Self {
        Lemma1Params { chains: Vec::new(), functional: Functional::Sum, random: Some(RandomChains { count: 20, max_n: 6 }) }
    }
}

impl Params for Lemma1Params {
    const COMMAND: &'static str = "verify-lemma1";

    fn validate(&self) -> Result<()> {
        for c in &self.chains {
            c.validate()?;
        }
        if let Some(r) = self.random {
            if r.count > MAX_RANDOM_CHAINS {
                return invalid!("random.count must be <= {MAX_RANDOM_CHAINS}, got {}", r.count);
            }
            if !(1..=MAX_HORIZON).contains(&r.max_n) {
                return invalid!("random.max_n must lie in 1..={MAX_HORIZON}, got {}", r.max_n);
            }
        }
        if self.chains.is_empty() && self.random.is_none_or(|r| r.count == 0) {
            return invalid!("no chains to check: give `chains` or `random`");
        }
        Ok(())
    }

    fn example() -> Self {
        Self::default()
    }
}

/// `check-moments`: the moment bound, and optionally the risk stationarity
/// bound on the same model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsParams {
    pub model: ChainModel,
    pub n_list: Vec<usize>,
    pub replicates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskCheck>,
}

impl Default for MomentsParams {
    fn default() -> Self {
        MomentsParams {
            model: ChainModel::gaussian_ar1(vec![0.5], 1.0, 1.0),
            n_list: vec![2, 5, 10, 50],
            replicates: 100_000,
            risk: None,
        }
    }
}

impl Params for MomentsParams {
    const COMMAND: &'static str = "check-moments";

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| !(1..=MAX_SIM_LEN).contains(&n)) {
            return invalid!("n_list entries must lie in 1..={MAX_SIM_LEN}");
        }
        if !(2..=100_000_000).contains(&self.replicates) {
            return invalid!("replicates must lie in 2..=100000000, got {}", self.replicates);
        }
        if let Some(r) = &self.risk {
            r.loss.validate()?;
            if r.t_period == 0 || r.t_period > MAX_T || r.n > MAX_SIM_LEN || !(2..=100_000_000).contains(&r.replicates) {
                return invalid!("risk check sizes are out of range");
            }
        }
        Ok(())
    }

    fn example() -> Self {
        Self::default()
    }
}

impl Params for StudyConfig {
    const COMMAND: &'static str = "reproduce-study";

    fn validate(&self) -> Result<()> {
        self.model()?;
        if !(2..=MAX_SIM_LEN).contains(&self.n) {
            return invalid!("n must lie in 2..={MAX_SIM_LEN}, got {}", self.n);
        }
        if !(1..=MAX_T).contains(&self.t_max) {
            return invalid!("t_max must lie in 1..={MAX_T}, got {}", self.t_max);
        }
        if !(finite("rho_max", self.rho_max)? >= 0.0 && self.rho_max < 1.0) {
            return invalid!("rho_max must lie in [0, 1), got {}", self.rho_max);
        }
        if let Some(eps) = self.epsilon {
            if !(finite("epsilon", eps)? > 0.0) {
                return invalid!("epsilon must be > 0, got {eps}");
            }
        }
        self.loss.validate()
    }

    fn example() -> Self {
        StudyConfig::default()
    }
}
