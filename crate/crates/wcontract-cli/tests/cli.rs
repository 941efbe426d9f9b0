use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 3

[[space]]
name = "circle"
kind = "circle"
n = 48

[[curvature]]
name = "flat"
r = 0.0
m = 1.0

[[density]]
name = "cos"
profile = "cos"

[[density]]
name = "random"
profile = "random"

[[experiment]]
check = "cd-weak"
space = "circle"
curvature = "flat"
densities = ["cos", "random"]

[[experiment]]
check = "hwi"
space = "circle"
curvature = "flat"
densities = ["cos", "random"]
"#;

fn wcontract(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wcontract")).args(args).env_remove("WCONTRACT_OUT").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn invalid_config_exits_three_and_names_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[[space]]\nname = \"s\"\nkind = \"circle\"\nn = 4\n\n[[experiment]]\ncheck = \"no-such-check\"\n",
    );
    let out = wcontract(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("space[0] (s).n"), "{err}");
    assert!(err.contains("experiment[0].check"), "{err}");
}

#[test]
fn missing_config_exits_three() {
    let out = wcontract(&["run", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_config_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "");
    let out_dir = dir.path().join("out");
    let out = wcontract(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_dir.join("checks.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn small_run_is_deterministic_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = wcontract(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
        assert!(stdout(&out).contains("exit status: 0"));
        csvs.push(std::fs::read(out_dir.join("checks.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let report = wcontract(&["report", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    assert!(stdout(&report).contains("cd-weak#0"));
}

#[test]
fn environment_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let env_dir = dir.path().join("env");
    let out = Command::new(env!("CARGO_BIN_EXE_wcontract"))
        .args(["run", cfg.to_str().unwrap()])
        .env("WCONTRACT_OUT", &env_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.join("summary.txt").exists());
}

#[test]
fn inflated_reference_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml");
    let out = wcontract(&["run", cfg, "--inflate-r", "1.0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("equivalence-interval [equivalence]: violated"));
}

#[test]
fn quick_subcommands_print_rows() {
    let cases: [(&[&str], &str); 5] = [
        (&["check-cd", "--n", "48"], "cd-pointwise"),
        (&["contract", "--n", "48", "--times", "0.1,0.5"], "contraction-sinh"),
        (&["evi", "--kind", "interval", "--n", "64", "--times", "0.1"], "evi"),
        (&["func-ineq", "--kind", "interval", "--n", "64", "--times", "0.1"], "log-sobolev"),
        (&["gradflow"], "gradflow-contraction"),
    ];
    for (args, name) in cases {
        let out = wcontract(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stdout(&out));
        let text = stdout(&out);
        assert!(text.starts_with("experiment,name,anchor"));
        assert!(text.lines().any(|l| l.split(',').nth(1).is_some_and(|n| n.starts_with(name))), "{args:?}: {text}");
    }
}

#[test]
fn gradflow_beyond_the_convex_box_fails() {
    let out = wcontract(&["gradflow", "--r", "1.0", "--m", "2", "--cube=-2,2", "--x0", "1.5,1.0", "--y0", "0.1,-0.2"]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
}
