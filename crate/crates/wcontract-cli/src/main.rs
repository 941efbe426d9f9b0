use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wcontract::config::{
    CurvatureConfig, DensityConfig, ExperimentConfig, PotentialConfig, RunConfig, SpaceConfig, SpaceKind,
};
use wcontract::runner::{self, RunOptions};

/// Exit status for invalid configurations and I/O failures.
const CONFIG_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "wcontract", version, about = "Numerical checks of dimensional Wasserstein contraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a TOML config and write checks.csv and summary.txt.
    Run {
        config: PathBuf,
        /// Output directory (overrides WCONTRACT_OUT and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add this amount to every curvature bound R.
        #[arg(long, allow_hyphen_values = true)]
        inflate_r: Option<f64>,
    },
    /// Print the summary of a previous run and its failing rows.
    Report { dir: PathBuf },
    /// Pointwise and weak curvature-dimension checks on one space.
    CheckCd(SpaceArgs),
    /// Contraction checks (sinh form, squared form, two-time) on the reference family.
    Contract(SpaceArgs),
    /// Evolution variational inequality on the reference family.
    Evi(SpaceArgs),
    /// Euclidean gradient-flow sandbox for a quadratic potential.
    Gradflow(FlowArgs),
    /// Entropy, Fisher information and HWI-type inequalities.
    FuncIneq(SpaceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Circle,
    Interval,
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long, value_enum, default_value = "circle")]
    kind: Kind,
    #[arg(long, default_value_t = 128)]
    n: usize,
    /// `zero`, `quadratic`; defaults to zero on the circle and quadratic on the interval.
    #[arg(long)]
    potential: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    /// Dimension bound; `inf` is accepted.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5, 1.0])]
    times: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    r: f64,
    #[arg(long, default_value_t = 2.0)]
    m: f64,
    /// Scale c of F(x) = c|x|²/2.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    scale: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = vec![-0.5, 0.5])]
    cube: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = vec![0.4, 0.3])]
    x0: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = vec![-0.2, 0.1])]
    y0: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    t_end: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Run { config, out, inflate_r } => {
            let cfg = RunConfig::from_path(&config)?;
            let outcome = runner::run(&cfg, &RunOptions { out_dir: out, inflate_r })?;
            print!("{}", runner::summary_text(&outcome.results));
            println!("reports written to {}", outcome.out_dir.display());
            Ok(outcome.exit_code() as u8)
        }
        Command::Report { dir } => {
            print!("{}", runner::report_dir(&dir)?);
            Ok(0)
        }
        Command::CheckCd(a) => quick(&a, &["cd-pointwise", "cd-weak"]),
        Command::Contract(a) => quick(&a, &["contraction-ii", "contraction-iii", "two-time"]),
        Command::Evi(a) => quick(&a, &["evi"]),
        Command::FuncIneq(a) => {
            let checks: &[&str] = match a.kind {
                Kind::Circle => &["hwi", "hwi-regularization", "de-bruijn", "metric-derivative"],
                Kind::Interval => {
                    &["entropy-energy", "log-sobolev", "fisher-decay", "fisher-differential", "de-bruijn", "entropy-creation"]
                }
            };
            quick(&a, checks)
        }
        Command::Gradflow(a) => gradflow(&a),
    }
}

/// One space, one curvature bound and two densities; prints checks.csv to stdout.
fn quick(a: &SpaceArgs, checks: &[&str]) -> anyhow::Result<u8> {
    let (kind, default_pot, r, m, dens) = match a.kind {
        Kind::Circle => {
            let mut vm = DensityConfig::new("von-mises", "von-mises");
            vm.center = std::f64::consts::FRAC_PI_2;
            vm.kappa = 4.0;
            (SpaceKind::Circle, "zero", 0.0, 1.0, vec![DensityConfig::new("cos", "cos"), vm])
        }
        Kind::Interval => {
            let mut g = DensityConfig::new("gaussian", "gaussian");
            g.center = 0.25;
            g.sigma = 0.08;
            (SpaceKind::Interval, "quadratic", 0.7, 2.0, vec![DensityConfig::new("cos", "cos"), g])
        }
    };
    let mut space = SpaceConfig::new("space", kind, a.n);
    space.potential = a.potential.clone().unwrap_or_else(|| default_pot.into());
    let mut cfg = RunConfig {
        seed: 0,
        output_dir: String::new(),
        spaces: vec![space],
        curvatures: vec![CurvatureConfig::new("bound", a.r.unwrap_or(r), a.m.unwrap_or(m))],
        densities: dens,
        experiments: Vec::new(),
    };
    for check in checks {
        let mut e = ExperimentConfig::new(check);
        e.space = Some("space".into());
        e.curvature = Some("bound".into());
        if !matches!(*check, "contraction-ii" | "contraction-iii" | "two-time" | "evi") {
            e.densities = cfg.densities.iter().map(|d| d.name.clone()).collect();
        }
        if *check != "cd-pointwise" {
            e.times = a.times.clone();
        }
        cfg.experiments.push(e);
    }
    finish(cfg, a.out.clone())
}

fn gradflow(a: &FlowArgs) -> anyhow::Result<u8> {
    anyhow::ensure!(a.cube.len() == 2, "--cube takes lo,hi");
    anyhow::ensure!(a.x0.len() == a.y0.len(), "--x0 and --y0 must have the same length");
    let pot = PotentialConfig { kind: "quadratic".into(), dim: a.x0.len(), scale: a.scale, coeffs: Vec::new() };
    let mut cfg = RunConfig {
        seed: 0,
        output_dir: String::new(),
        spaces: Vec::new(),
        curvatures: vec![CurvatureConfig::new("bound", a.r, a.m)],
        densities: Vec::new(),
        experiments: Vec::new(),
    };
    for check in ["gradflow-convexity", "gradflow-contraction", "gradflow-converse"] {
        let mut e = ExperimentConfig::new(check);
        e.curvature = Some("bound".into());
        e.potential = Some(pot.clone());
        e.cube = Some([a.cube[0], a.cube[1]]);
        if check == "gradflow-contraction" {
            e.x0 = a.x0.clone();
            e.y0 = a.y0.clone();
            e.t_end = Some(a.t_end);
        }
        cfg.experiments.push(e);
    }
    finish(cfg, a.out.clone())
}

fn finish(cfg: RunConfig, out: Option<PathBuf>) -> anyhow::Result<u8> {
    cfg.validate()?;
    let results = runner::execute(&cfg)?;
    print!("{}", String::from_utf8(runner::checks_csv(&results)?)?);
    if let Some(dir) = out {
        runner::write_reports(&results, &dir)?;
    }
    Ok(runner::exit_code(&results) as u8)
}
