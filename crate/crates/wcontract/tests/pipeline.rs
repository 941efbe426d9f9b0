use std::path::Path;

use wcontract::config::{Expect, RunConfig};
use wcontract::runner::{self, exit_code, execute, resolve_out_dir, ExperimentResult, RunOptions, Verdict, CSV_HEADER};

const SPACES: &str = r#"
seed = 7

[[space]]
name = "circle"
kind = "circle"
n = 48

[[space]]
name = "interval"
kind = "interval"
n = 48
potential = "quadratic"

[[space]]
name = "interval-fine"
kind = "interval"
n = 256
potential = "quadratic"

[[curvature]]
name = "flat"
r = 0.0
m = 1.0

[[curvature]]
name = "ou"
r = 0.7
m = 2.0

[[curvature]]
name = "too-strong"
r = 5.0
m = 2.0

[[curvature]]
name = "linear"
r = 1.0
m = inf

[[density]]
name = "cos"
profile = "cos"

[[density]]
name = "bump"
profile = "gaussian"
center = 0.2
sigma = 0.08
"#;

fn config(experiments: &str) -> RunConfig {
    RunConfig::from_toml(&format!("{SPACES}\n{experiments}")).unwrap()
}

#[test]
fn empty_run_exits_zero_with_header_only() {
    let cfg = config("");
    let results = execute(&cfg).unwrap();
    assert!(results.is_empty());
    assert_eq!(exit_code(&results), 0);
    let csv = String::from_utf8(runner::checks_csv(&results).unwrap()).unwrap();
    assert_eq!(csv.trim_end(), CSV_HEADER.join(","));
}

#[test]
fn closed_gate_makes_dependents_inconclusive() {
    let cfg = config(
        r#"
[[experiment]]
label = "eq"
check = "equivalence"
space = "interval"
curvature = "too-strong"
times = [0.1, 0.5]

[[experiment]]
label = "ls"
check = "log-sobolev"
space = "interval"
curvature = "ou"
densities = ["cos", "bump"]
gate = "eq"
"#,
    );
    let results = execute(&cfg).unwrap();
    assert_eq!(results[0].verdict, Verdict::Violated);
    assert_eq!(results[1].verdict, Verdict::Inconclusive);
    assert_eq!(exit_code(&results), 1);
}

#[test]
fn open_gate_runs_dependents() {
    let cfg = config(
        r#"
[[experiment]]
label = "eq"
check = "equivalence"
space = "interval-fine"
curvature = "ou"
times = [0.1, 0.5]

[[experiment]]
label = "ls"
check = "log-sobolev"
space = "interval"
curvature = "ou"
densities = ["cos", "bump"]
gate = "eq"
"#,
    );
    let results = execute(&cfg).unwrap();
    assert_eq!(results[0].verdict, Verdict::Ok);
    assert_eq!(results[1].verdict, Verdict::Ok);
    assert_eq!(results[1].rows.len(), 2);
    assert!(results[0].calibration.iter().any(|(k, _)| k.starts_with("r_star")));
}

fn result(verdict: Verdict) -> ExperimentResult {
    ExperimentResult {
        label: "x".into(),
        check: "cd-weak".into(),
        expect: Expect::Pass,
        rows: Vec::new(),
        verdict,
        calibration: Vec::new(),
        files: Vec::new(),
    }
}

#[test]
fn exit_code_precedence() {
    let err = || Verdict::Error("boom".into());
    assert_eq!(exit_code(&[result(Verdict::Ok)]), 0);
    assert_eq!(exit_code(&[result(Verdict::Ok), result(Verdict::Inconclusive)]), 2);
    assert_eq!(exit_code(&[result(Verdict::Inconclusive), result(Verdict::Violated)]), 1);
    assert_eq!(exit_code(&[result(Verdict::Inconclusive), result(err())]), 1);
}

#[test]
fn expected_failure_semantics() {
    let cfg = config(
        r#"
[[experiment]]
label = "holds"
check = "cd-weak"
space = "circle"
curvature = "flat"
densities = ["cos"]
expect = "fail"

[[experiment]]
label = "breaks"
check = "cd-weak"
space = "interval"
curvature = "too-strong"
densities = ["cos"]
expect = "fail"
"#,
    );
    let results = execute(&cfg).unwrap();
    assert_eq!(results[0].expect, Expect::Fail);
    assert_eq!(results[0].verdict, Verdict::Violated);
    assert_eq!(results[1].verdict, Verdict::Ok);
    let summary = runner::summary_text(&results);
    assert!(summary.contains("(expected to fail)"));
}

#[test]
fn equality_tolerance_tightens_rows() {
    let exp = |tol: &str| {
        format!(
            r#"
[[experiment]]
check = "gradflow-contraction"
curvature = "linear"
potential = {{ kind = "quadratic", dim = 2, scale = 1.0 }}
x0 = [0.8, -0.3]
y0 = [-0.5, 0.6]
t_end = 1.0
equality_tol = {tol}
"#
        )
    };
    let ok = execute(&config(&exp("1e-7"))).unwrap();
    assert_eq!(ok[0].verdict, Verdict::Ok);
    assert!(ok[0].rows.iter().all(|r| r.report.tol == 1e-7 && r.report.margin.abs() <= 1e-7));
    let strict = execute(&config(&exp("1e-30"))).unwrap();
    assert_eq!(strict[0].verdict, Verdict::Violated);
}

#[test]
fn check_errors_become_error_verdicts() {
    let cfg = config(
        r#"
[[experiment]]
label = "odd-step"
check = "gradflow-contraction"
curvature = "linear"
potential = { kind = "quadratic", dim = 2, scale = 1.0 }
x0 = [0.8, -0.3]
y0 = [-0.5, 0.6]
t_end = 1.0
du = 0.3
"#,
    );
    let results = execute(&cfg).unwrap();
    assert!(matches!(results[0].verdict, Verdict::Error(_)), "{:?}", results[0].verdict);
    assert_eq!(results[0].rows.len(), 1);
    assert_eq!(exit_code(&results), 1);
    assert!(runner::summary_text(&results).contains("0/1 rows pass"));
}

#[test]
fn output_directory_precedence() {
    let mut cfg = config("");
    cfg.output_dir = "from-config".into();
    std::env::remove_var(runner::OUT_ENV);
    assert_eq!(resolve_out_dir(None, &cfg), Path::new("from-config"));
    std::env::set_var(runner::OUT_ENV, "from-env");
    assert_eq!(resolve_out_dir(None, &cfg), Path::new("from-env"));
    assert_eq!(resolve_out_dir(Some(Path::new("from-cli")), &cfg), Path::new("from-cli"));
    std::env::remove_var(runner::OUT_ENV);
}

#[test]
fn run_writes_reports_and_report_lists_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"
[[experiment]]
label = "weak"
check = "cd-weak"
space = "interval"
curvature = "too-strong"
densities = ["cos"]
"#,
    );
    let out = runner::run(&cfg, &RunOptions { out_dir: Some(dir.path().to_path_buf()), inflate_r: None }).unwrap();
    assert_eq!(out.exit_code(), 1);
    assert!(dir.path().join("checks.csv").exists());
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("weak [cd-weak]: violated"));
    let report = runner::report_dir(dir.path()).unwrap();
    assert!(report.contains("weak"));
}

#[test]
fn inflation_shifts_every_curvature() {
    let mut cfg = config("");
    runner::inflate_r(&mut cfg, 0.5);
    let r: Vec<f64> = cfg.curvatures.iter().map(|c| c.r).collect();
    assert_eq!(r, vec![0.5, 1.2, 5.5, 1.5]);
}
