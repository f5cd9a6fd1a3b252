//! The `nonstat` command-line tool.
//!
//! Exit codes: 0 on success or when every check passes, 1 when a check
//! fails, 2 on usage or configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use nonstat::chain::simulate;
use nonstat::experiments::{
    check_moment_lemma, check_risk_stationarity, reproduce_simulation_study, run_tail_experiment, BoundFamily,
    MomentReport, StationarityReport, StudyConfig, StudySummary, TailExperiment, ValidationReport,
};
use nonstat::io::config::{BoundParams, FitPeriodParams, Lemma1Params, MomentsParams, Params, RunConfig, SimulateParams};
use nonstat::io::{csv_string, fmt_real, read_trajectory, trajectory_to_csv, write_output};
use nonstat::martingale::{check_lemma1, random_finite_chain, DecompositionReport};
use nonstat::parallel::with_threads;
use nonstat::periodic_ar::{fit_period, FitReport};
use nonstat::seed::replicate_rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "nonstat",
    version,
    about = "Tail bounds for nonstationary contracting Markov chains and periodic AR period selection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration `{"params": {..}}`; unknown keys are rejected
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the seed in the configuration
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores
    #[arg(long, value_name = "N", env = "NONSTAT_THREADS")]
    pub threads: Option<usize>,
    /// Output directory for CSV files and summary.json; without it the summary is printed
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories of a chain model
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trajectory length
        #[arg(long, value_name = "N")]
        n: Option<usize>,
        /// Number of independent trajectories
        #[arg(long, value_name = "N")]
        replicates: Option<u64>,
    },
    /// Evaluate a tail bound on a grid of deviations
    Bound {
        #[command(flatten)]
        common: Common,
        /// Comma-separated deviations x >= 0, replacing the configured grid
        #[arg(long, value_name = "X[,X..]", value_delimiter = ',')]
        x: Option<Vec<f64>>,
    },
    /// Select the period of a periodic AR predictor on a trajectory CSV
    FitPeriod {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV with columns t, x_1, .., x_d
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Largest period tried
        #[arg(long, value_name = "N")]
        t_max: Option<usize>,
    },
    /// Compare empirical tail frequencies with a tail bound by Monte Carlo
    ValidateBounds {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo replicates (at least 10000)
        #[arg(long, value_name = "N")]
        replicates: Option<u64>,
    },
    /// Check the martingale decomposition exhaustively on finite-support chains
    VerifyLemma1 {
        #[command(flatten)]
        common: Common,
        /// Number of random chains to draw
        #[arg(long, value_name = "N")]
        count: Option<usize>,
        /// Largest horizon of the random chains
        #[arg(long, value_name = "N")]
        max_n: Option<usize>,
    },
    /// Check the moment bound and optionally the risk stationarity bound
    CheckMoments {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo replicates
        #[arg(long, value_name = "N")]
        replicates: Option<u64>,
    },
    /// Run the periodic AR(1) simulation study
    ReproduceStudy {
        #[command(flatten)]
        common: Common,
        /// Trajectory length
        #[arg(long, value_name = "N")]
        n: Option<usize>,
        /// Largest period tried
        #[arg(long, value_name = "N")]
        t_max: Option<usize>,
    },
}

/// The machine-readable summary written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary<P, R> {
    pub command: String,
    pub passed: bool,
    /// The effective configuration, without `threads` and `out`.
    pub config: RunConfig<P>,
    pub result: R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateResult {
    pub seed: u64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRow {
    pub x: f64,
    pub bound_refined: f64,
    pub bound_simple: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundResult {
    pub family: BoundFamily,
    pub rows: Vec<BoundRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsResult {
    pub moments: MomentReport,
    #[serde(default)]
    pub risk: Option<StationarityReport>,
}

pub type SimulateSummary = Summary<SimulateParams, SimulateResult>;
pub type BoundSummary = Summary<BoundParams, BoundResult>;
pub type FitSummary = Summary<FitPeriodParams, FitReport>;
pub type ValidateSummary = Summary<TailExperiment, ValidationReport>;
pub type Lemma1Summary = Summary<Lemma1Params, Vec<DecompositionReport>>;
pub type MomentsSummary = Summary<MomentsParams, MomentsResult>;
pub type StudyRunSummary = Summary<StudyConfig, StudySummary>;

enum Failure {
    /// Bad arguments or configuration; `Some` carries the schema to print.
    Usage(String, Option<String>),
    Runtime(nonstat::Error),
}

impl From<nonstat::Error> for Failure {
    fn from(e: nonstat::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

struct Outputs {
    files: Vec<(String, String)>,
    summary: String,
    passed: bool,
}

fn schema_usage<P: Params>(msg: String) -> Failure {
    Failure::Usage(msg, Some(RunConfig::<P>::example_json()))
}

/// Reads `--config`, or falls back to `default` when the command has one.
fn load<P: Params>(common: &Common, default: Option<fn() -> P>) -> CmdResult<RunConfig<P>> {
    match (&common.config, default) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display()), None))?;
            RunConfig::<P>::from_json_str(&text)
                .map_err(|e| schema_usage::<P>(format!("invalid {} config {}: {e}", P::COMMAND, path.display())))
        }
        (None, Some(f)) => Ok(RunConfig::new(f())),
        (None, None) => Err(schema_usage::<P>(format!("`{}` needs --config PATH", P::COMMAND))),
    }
}

fn revalidate<P: Params>(cfg: &RunConfig<P>) -> CmdResult<()> {
    cfg.params.validate().map_err(|e| schema_usage::<P>(format!("invalid {} parameters: {e}", P::COMMAND)))
}

fn summary<P: Params, R: Serialize>(cfg: &RunConfig<P>, passed: bool, result: &R) -> CmdResult<String> {
    #[derive(Serialize)]
    struct View<'a, P, R> {
        command: &'a str,
        passed: bool,
        config: &'a RunConfig<P>,
        result: &'a R,
    }
    let config = RunConfig { threads: None, out: None, ..cfg.clone() };
    let view = View { command: P::COMMAND, passed, config: &config, result };
    Ok(serde_json::to_string_pretty(&view).map_err(nonstat::Error::from)? + "\n")
}

fn seed_of<P>(common: &Common, cfg: &RunConfig<P>, fallback: u64) -> u64 {
    common.seed.or(cfg.base_seed).unwrap_or(fallback)
}

fn cmd_simulate(common: &Common, n: Option<usize>, replicates: Option<u64>) -> CmdResult<(RunConfig<SimulateParams>, Outputs)> {
    let mut cfg = load::<SimulateParams>(common, None)?;
    if let Some(n) = n {
        cfg.params.n = n;
    }
    if let Some(r) = replicates {
        cfg.params.replicates = r;
    }
    revalidate(&cfg)?;
    let seed = seed_of(common, &cfg, 0);
    cfg.base_seed = Some(seed);
    let p = &cfg.params;
    let mut files = Vec::new();
    for i in 0..p.replicates {
        let traj = simulate(&p.model, p.n, seed, i)?;
        let name = if p.replicates == 1 { "trajectory.csv".to_string() } else { format!("trajectory_{i:05}.csv") };
        files.push((name, trajectory_to_csv(&traj)?));
    }
    let result = SimulateResult { seed, files: files.iter().map(|(n, _)| n.clone()).collect() };
    let summary = summary(&cfg, true, &result)?;
    Ok((cfg, Outputs { files, summary, passed: true }))
}

fn cmd_bound(common: &Common, x: Option<Vec<f64>>) -> CmdResult<(RunConfig<BoundParams>, Outputs)> {
    let mut cfg = load::<BoundParams>(common, None)?;
    if let Some(x) = x {
        cfg.params.x = x;
    }
    revalidate(&cfg)?;
    let p = &cfg.params;
    let family = p.inputs.family();
    let rows = p
        .x
        .iter()
        .map(|&x| {
            let (bound_refined, bound_simple) = p.inputs.tail(x)?;
            Ok(BoundRow { x, bound_refined, bound_simple })
        })
        .collect::<nonstat::Result<Vec<_>>>()?;
    let name = serde_json::to_value(family).map_err(nonstat::Error::from)?.as_str().unwrap_or("").to_string();
    let csv = csv_string(
        &["family", "x", "bound_refined", "bound_simple"],
        rows.iter().map(|r| vec![name.clone(), fmt_real(r.x), fmt_real(r.bound_refined), fmt_real(r.bound_simple)]),
    )?;
    let summary = summary(&cfg, true, &BoundResult { family, rows })?;
    Ok((cfg, Outputs { files: vec![("bound.csv".into(), csv)], summary, passed: true }))
}

fn cmd_fit_period(
    common: &Common,
    data: Option<PathBuf>,
    t_max: Option<usize>,
) -> CmdResult<(RunConfig<FitPeriodParams>, Outputs)> {
    let mut cfg = load::<FitPeriodParams>(common, None)?;
    if let Some(d) = data {
        cfg.params.data = Some(d.to_string_lossy().into_owned());
    }
    if let Some(t) = t_max {
        cfg.params.settings.t_max = t;
    }
    revalidate(&cfg)?;
    let Some(path) = cfg.params.data.clone() else {
        return Err(schema_usage::<FitPeriodParams>("`fit-period` needs --data PATH or params.data".into()));
    };
    let traj = read_trajectory(Path::new(&path))?;
    let report = fit_period(&traj, &cfg.params.settings)?;
    let risk_csv = csv_string(
        &["T", "risk", "penalty", "objective"],
        report.per_t.iter().map(|p| vec![p.t.to_string(), fmt_real(p.risk), fmt_real(p.penalty), fmt_real(p.objective)]),
    )?;
    let slope_csv = csv_string(
        &["c", "t_hat"],
        report.slope.trace.iter().map(|(c, t)| vec![fmt_real(*c), t.to_string()]),
    )?;
    let summary = summary(&cfg, true, &report)?;
    Ok((
        cfg,
        Outputs { files: vec![("risk.csv".into(), risk_csv), ("slope.csv".into(), slope_csv)], summary, passed: true },
    ))
}

fn cmd_validate(common: &Common, replicates: Option<u64>) -> CmdResult<(RunConfig<TailExperiment>, Outputs)> {
    let mut cfg = load::<TailExperiment>(common, None)?;
    if let Some(r) = replicates {
        cfg.params.replicates = r;
    }
    cfg.params.base_seed = seed_of(common, &cfg, cfg.params.base_seed);
    cfg.base_seed = Some(cfg.params.base_seed);
    revalidate(&cfg)?;
    let report = run_tail_experiment(&cfg.params)?;
    let csv = report.to_csv()?;
    let summary = summary(&cfg, report.passed, &report)?;
    Ok((cfg, Outputs { files: vec![("tail.csv".into(), csv)], summary, passed: report.passed }))
}

fn cmd_lemma1(
    common: &Common,
    count: Option<usize>,
    max_n: Option<usize>,
) -> CmdResult<(RunConfig<Lemma1Params>, Outputs)> {
    let mut cfg = load::<Lemma1Params>(common, Some(Lemma1Params::default))?;
    if count.is_some() || max_n.is_some() {
        let base = cfg.params.random.unwrap_or(nonstat::io::config::RandomChains { count: 20, max_n: 6 });
        cfg.params.random = Some(nonstat::io::config::RandomChains {
            count: count.unwrap_or(base.count),
            max_n: max_n.unwrap_or(base.max_n),
        });
    }
    revalidate(&cfg)?;
    let seed = seed_of(common, &cfg, 0);
    cfg.base_seed = Some(seed);
    let p = &cfg.params;
    let mut chains = p.chains.clone();
    if let Some(r) = p.random {
        chains.extend((0..r.count as u64).map(|i| random_finite_chain(&mut replicate_rng(seed, i), r.max_n)));
    }
    let reports = chains.iter().map(|c| check_lemma1(c, p.functional)).collect::<nonstat::Result<Vec<_>>>()?;
    let passed = reports.iter().all(DecompositionReport::passed);
    let csv = csv_string(
        &["chain", "k", "inequality", "checked", "min_slack", "max_slack", "violations"],
        reports.iter().enumerate().flat_map(|(i, rep)| {
            rep.rows.iter().map(move |r| {
                vec![
                    i.to_string(),
                    r.k.to_string(),
                    r.inequality.clone(),
                    r.checked.to_string(),
                    fmt_real(r.min_slack),
                    fmt_real(r.max_slack),
                    r.violations.to_string(),
                ]
            })
        }),
    )?;
    let text: String = reports.iter().enumerate().map(|(i, r)| format!("chain {i}\n{}", r.to_text())).collect();
    let summary = summary(&cfg, passed, &reports)?;
    Ok((cfg, Outputs { files: vec![("lemma1.csv".into(), csv), ("lemma1.txt".into(), text)], summary, passed }))
}

fn cmd_moments(common: &Common, replicates: Option<u64>) -> CmdResult<(RunConfig<MomentsParams>, Outputs)> {
    let mut cfg = load::<MomentsParams>(common, Some(MomentsParams::default))?;
    if let Some(r) = replicates {
        cfg.params.replicates = r;
        if let Some(risk) = &mut cfg.params.risk {
            risk.replicates = r;
        }
    }
    let seed = seed_of(common, &cfg, 0);
    cfg.base_seed = Some(seed);
    if let Some(risk) = &mut cfg.params.risk {
        if common.seed.is_some() || cfg.base_seed.is_some() {
            risk.base_seed = seed;
        }
    }
    revalidate(&cfg)?;
    let p = &cfg.params;
    let moments = check_moment_lemma(&p.model, &p.n_list, p.replicates, seed)?;
    let risk = p.risk.as_ref().map(|r| check_risk_stationarity(&p.model, r)).transpose()?;
    let passed = moments.passed && risk.as_ref().is_none_or(|r| r.pass);
    let mut files = vec![("moments.csv".to_string(), moments.to_csv()?)];
    if let Some(r) = &risk {
        files.push(("risk_phases.csv".into(), r.to_csv()?));
    }
    let summary = summary(&cfg, passed, &MomentsResult { moments, risk })?;
    Ok((cfg, Outputs { files, summary, passed }))
}

fn cmd_study(common: &Common, n: Option<usize>, t_max: Option<usize>) -> CmdResult<(RunConfig<StudyConfig>, Outputs)> {
    let mut cfg = load::<StudyConfig>(common, Some(StudyConfig::default))?;
    if let Some(n) = n {
        cfg.params.n = n;
    }
    if let Some(t) = t_max {
        cfg.params.t_max = t;
    }
    cfg.params.seed = seed_of(common, &cfg, cfg.params.seed);
    cfg.base_seed = Some(cfg.params.seed);
    revalidate(&cfg)?;
    let out = reproduce_simulation_study(&cfg.params)?;
    let s = &out.summary;
    let passed = s.selected_t == 4 && s.t4_beats_smaller;
    let summary = summary(&cfg, passed, s)?;
    let files = vec![
        ("trajectory.csv".to_string(), out.trajectory_csv.clone()),
        ("acf.csv".into(), out.acf_csv.clone()),
        ("risk.csv".into(), out.risk_csv.clone()),
        ("slope.csv".into(), out.slope_csv.clone()),
    ];
    Ok((cfg, Outputs { files, summary, passed }))
}

fn threads_of<P>(common: &Common, cfg: &RunConfig<P>) -> usize {
    common.threads.or(cfg.threads).unwrap_or(0)
}

fn emit(dir: Option<&Path>, outputs: &Outputs) -> CmdResult<()> {
    match dir {
        Some(dir) => {
            for (name, contents) in &outputs.files {
                write_output(dir, name, contents)?;
            }
            write_output(dir, "summary.json", &outputs.summary)?;
        }
        None => print!("{}", outputs.summary),
    }
    Ok(())
}

/// Runs a subcommand inside a pool sized from `--threads`, then writes its
/// outputs to `--out` (or the configured `out`).
fn execute<P: Params>(
    common: &Common,
    peek: CmdResult<RunConfig<P>>,
    body: impl FnOnce() -> CmdResult<(RunConfig<P>, Outputs)> + Send,
) -> CmdResult<bool> {
    let threads = match &peek {
        Ok(cfg) => threads_of(common, cfg),
        Err(_) => common.threads.unwrap_or(0),
    };
    let (cfg, outputs) = with_threads(threads, body)?;
    let dir = common.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from));
    emit(dir.as_deref(), &outputs)?;
    Ok(outputs.passed)
}

fn dispatch(cli: Cli) -> CmdResult<bool> {
    match cli.command {
        Command::Simulate { common, n, replicates } => {
            execute(&common, load::<SimulateParams>(&common, None), || cmd_simulate(&common, n, replicates))
        }
        Command::Bound { common, x } => execute(&common, load::<BoundParams>(&common, None), || cmd_bound(&common, x)),
        Command::FitPeriod { common, data, t_max } => {
            execute(&common, load::<FitPeriodParams>(&common, None), || cmd_fit_period(&common, data, t_max))
        }
        Command::ValidateBounds { common, replicates } => {
            execute(&common, load::<TailExperiment>(&common, None), || cmd_validate(&common, replicates))
        }
        Command::VerifyLemma1 { common, count, max_n } => execute(
            &common,
            load::<Lemma1Params>(&common, Some(Lemma1Params::default)),
            || cmd_lemma1(&common, count, max_n),
        ),
        Command::CheckMoments { common, replicates } => execute(
            &common,
            load::<MomentsParams>(&common, Some(MomentsParams::default)),
            || cmd_moments(&common, replicates),
        ),
        Command::ReproduceStudy { common, n, t_max } => execute(
            &common,
            load::<StudyConfig>(&common, Some(StudyConfig::default)),
            || cmd_study(&common, n, t_max),
        ),
    }
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(Failure::Usage(msg, schema)) => {
            eprintln!("error: {msg}");
            if let Some(schema) = schema {
                eprintln!("\nexpected configuration, for example:\n{schema}");
            }
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
