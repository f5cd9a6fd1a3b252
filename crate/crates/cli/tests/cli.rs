use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nonstat_cli::{
    BoundSummary, Cli, FitSummary, Lemma1Summary, MomentsSummary, SimulateSummary, StudyRunSummary, ValidateSummary,
    EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE,
};

fn nonstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonstat"))
        .args(args)
        .env_remove("NONSTAT_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn help_documents_every_flag() {
    use clap::CommandFactory;
    let cmd = Cli::command();
    let subs: Vec<_> = cmd.get_subcommands().collect();
    assert_eq!(subs.len(), 7);
    for sub in subs {
        let name = sub.get_name();
        let out = nonstat(&[name, "--help"]);
        assert_eq!(out.status.code(), Some(EXIT_OK));
        let help = String::from_utf8(out.stdout).unwrap();
        for arg in sub.get_arguments() {
            let Some(long) = arg.get_long() else { continue };
            if long == "help" {
                continue;
            }
            assert!(arg.get_help().is_some(), "{name} --{long} has no help text");
            let line = help
                .lines()
                .find(|l| l.trim_start().starts_with(&format!("--{long}")))
                .unwrap_or_else(|| panic!("{name} --help does not list --{long}"));
            let doc = arg.get_help().unwrap().to_string();
            assert!(line.contains(&doc), "{name} --{long}: {line:?}");
        }
        for flag in ["--config", "--seed", "--threads", "--out"] {
            assert!(help.contains(flag), "{name} lacks {flag}");
        }
    }
}

#[test]
fn bound_at_zero_is_one_for_every_family() {
    let tmp = tempfile::tempdir().unwrap();
    let families = [
        r#"{"family": "bernstein", "n": 50, "rho": 0.5, "m": 1.0, "v1": 1.0, "v2": 2.0}"#,
        r#"{"family": "cramer", "n": 50, "rho": 0.5, "a": 1.0, "k1": 2.0, "k2": 2.0}"#,
        r#"{"family": "mcdiarmid", "n": 3, "rho": 0.5, "m_k": [1.0, 1.0, 1.0]}"#,
    ];
    for (i, inputs) in families.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("b{i}.json"), &format!(r#"{{"params": {{"inputs": {inputs}, "x": [0.0, 0.5, 1.0]}}}}"#));
        let out = tmp.path().join(format!("out{i}"));
        let o = nonstat(&["bound", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = read(&out, "bound.csv");
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("family,x,bound_refined,bound_simple"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[2].parse::<f64>().unwrap(), 1.0);
        assert_eq!(first[3].parse::<f64>().unwrap(), 1.0);
        let s: BoundSummary = serde_json::from_str(&read(&out, "summary.json")).unwrap();
        assert_eq!(s.result.rows.len(), 3);
        assert_eq!(s.result.rows[0].bound_refined, 1.0);
    }
    // --x replaces the grid
    let cfg = write_config(tmp.path(), "bx.json", &format!(r#"{{"params": {{"inputs": {}, "x": [1.0]}}}}"#, families[0]));
    let o = nonstat(&["bound", "--config", &cfg, "--x", "0,2,4"]);
    let s: BoundSummary = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s.config.params.x, vec![0.0, 2.0, 4.0]);
}

#[test]
fn reproduce_study_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = nonstat(&["reproduce-study", "--seed", "7", "--threads", "1", "--out", a.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(EXIT_OK) | Some(EXIT_CHECK_FAILED)));
    let o = nonstat(&["reproduce-study", "--seed", "7", "--threads", "8", "--out", b.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(EXIT_OK) | Some(EXIT_CHECK_FAILED)));
    let (ca, cb) = (dir_contents(&a), dir_contents(&b));
    let names: Vec<&str> = ca.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["acf.csv", "risk.csv", "slope.csv", "summary.json", "trajectory.csv"]);
    assert_eq!(ca, cb);
    let s: StudyRunSummary = serde_json::from_str(&read(&a, "summary.json")).unwrap();
    assert_eq!(s.config.params.seed, 7);
    assert_eq!(s.result.risks.len(), 20);
    assert_eq!(s.passed, s.result.selected_t == 4 && s.result.t4_beats_smaller);
}

#[test]
fn fit_period_selects_four_on_seasonal_data() {
    let tmp = tempfile::tempdir().unwrap();
    let sim_cfg = write_config(
        tmp.path(),
        "sim.json",
        r#"{"params": {"model": {"model": {"kind": "ar1", "coeffs": [0.8, 0.5, 0.9, -0.7]},
            "noise": {"family": "gaussian", "sigma": 1.0}, "init": {"family": "gaussian", "sigma": 1.0},
            "rho": 0.9, "metric": "abs"}, "n": 400}}"#,
    );
    let sim_out = tmp.path().join("sim");
    let o = nonstat(&["simulate", "--config", &sim_cfg, "--seed", "1", "--out", sim_out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let s: SimulateSummary = serde_json::from_str(&read(&sim_out, "summary.json")).unwrap();
    assert_eq!(s.result.files, vec!["trajectory.csv"]);
    assert_eq!(read(&sim_out, "trajectory.csv").lines().count(), 401);

    let fit_cfg = write_config(
        tmp.path(),
        "fit.json",
        r#"{"params": {"settings": {"t_max": 20, "class": {"kind": "scalar_ar1", "rho_max": 0.9}, "loss": {"kind": "absolute"}}}}"#,
    );
    let fit_out = tmp.path().join("fit");
    let data = sim_out.join("trajectory.csv");
    let o = nonstat(&[
        "fit-period",
        "--config",
        &fit_cfg,
        "--data",
        data.to_str().unwrap(),
        "--out",
        fit_out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let s: FitSummary = serde_json::from_str(&read(&fit_out, "summary.json")).unwrap();
    assert_eq!(s.result.slope.selected_t, 4);
    assert_eq!(s.result.selected_t_penalized, 4);
    assert_eq!(s.result.net_cardinality, 721);
    assert_eq!(read(&fit_out, "risk.csv").lines().count(), 21);

    // missing data is a usage error
    let o = nonstat(&["fit-period", "--config", &fit_cfg]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
}

#[test]
fn check_commands_report_pass_and_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let model = r#"{"model": {"kind": "ar1", "coeffs": [0.5]}, "noise": {"family": "gaussian", "sigma": 1.0},
        "init": {"family": "gaussian", "sigma": 1.0}, "rho": 0.5, "metric": "abs"}"#;
    let good = write_config(
        tmp.path(),
        "good.json",
        &format!(r#"{{"params": {{"model": {model}, "functional": "coordinate_sum", "n": 20, "replicates": 10000, "bound_family": "bernstein"}}}}"#),
    );
    let out = tmp.path().join("good");
    let o = nonstat(&["validate-bounds", "--config", &good, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let s: ValidateSummary = serde_json::from_str(&read(&out, "summary.json")).unwrap();
    assert!(s.passed && s.result.passed);
    assert_eq!(read(&out, "tail.csv").lines().count(), 21);

    // a variance proxy far too small must be caught
    let bad = write_config(
        tmp.path(),
        "bad.json",
        &format!(
            r#"{{"params": {{"model": {model}, "functional": "coordinate_sum", "n": 20, "replicates": 10000, "bound_family": "bernstein",
            "bound_inputs": {{"family": "bernstein", "n": 20, "rho": 0.5, "m": 0.01, "v1": 0.01, "v2": 0.01}}}}}}"#
        ),
    );
    let o = nonstat(&["validate-bounds", "--config", &bad]);
    assert_eq!(o.status.code(), Some(EXIT_CHECK_FAILED));
    let s: ValidateSummary = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!s.passed);

    let o = nonstat(&["verify-lemma1", "--count", "5", "--max-n", "4"]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let s: Lemma1Summary = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s.result.len(), 5);

    let o = nonstat(&["check-moments", "--replicates", "20000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let s: MomentsSummary = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(s.result.moments.rows.len(), 4);
    assert_eq!(s.config.base_seed, Some(3));
}

#[test]
fn summaries_round_trip_under_their_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("l1");
    let o = nonstat(&["verify-lemma1", "--count", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let text = read(&out, "summary.json");
    let s: Lemma1Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&s).unwrap() + "\n", text);
    // the echoed configuration is itself a valid config file
    let cfg = write_config(tmp.path(), "echo.json", &serde_json::to_string(&s.config).unwrap());
    let o = nonstat(&["verify-lemma1", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), text);
    assert!(read(&out, "lemma1.txt").contains("all inequalities hold"));

    let study = tmp.path().join("st");
    nonstat(&["reproduce-study", "--seed", "2", "--t-max", "6", "--out", study.to_str().unwrap()]);
    let text = read(&study, "summary.json");
    let s: StudyRunSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&s).unwrap() + "\n", text);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(nonstat(&["no-such-command"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(nonstat(&["bound"]).status.code(), Some(EXIT_USAGE));
    let cfg = write_config(tmp.path(), "x.json", r#"{"params": {"seed": 1}, "unknown": true}"#);
    let o = nonstat(&["reproduce-study", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected configuration"));
    let missing = tmp.path().join("missing.json");
    assert_eq!(nonstat(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(EXIT_USAGE));
    assert_eq!(nonstat(&["simulate", "--threads", "many"]).status.code(), Some(EXIT_USAGE));
}

#[test]
fn threads_env_fallback_is_accepted() {
    let o = Command::new(env!("CARGO_BIN_EXE_nonstat"))
        .args(["verify-lemma1", "--count", "2"])
        .env("NONSTAT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(EXIT_OK));
}
