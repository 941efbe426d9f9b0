//! Executes a [`RunConfig`] and writes `checks.csv` and `summary.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Expect, ExperimentConfig, FunctionConfig, PotentialConfig, RunConfig, SpaceConfig, Trig};
use crate::error::{Error, Result};
use crate::funcineq;
use crate::gradflow::{self, PotentialSpec};
use crate::grid::{build_grid, check_pointwise_cd, check_weak_cd, default_family, CurvatureParams, GridDensity, WeightedGrid};
use crate::harness::{self, ContractionExperiment, ConverseOptions, Falsification, Space, Tolerance, QUAD_INTERVALS};
use crate::report::{anchor, CheckReport, Status};
use crate::suites;

/// Environment variable overriding the configured output directory.
pub const OUT_ENV: &str = "WCONTRACT_OUT";

pub const CSV_HEADER: [&str; 12] =
    ["experiment", "name", "anchor", "t", "lhs", "rhs", "margin", "tol", "pass", "expected", "status", "detail"];

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Ok,
    Violated,
    Inconclusive,
    Error(String),
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Ok => f.write_str("ok"),
            Verdict::Violated => f.write_str("violated"),
            Verdict::Inconclusive => f.write_str("inconclusive"),
            Verdict::Error(e) => write!(f, "error: {e}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub report: CheckReport,
    pub expected: Expect,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub label: String,
    pub check: String,
    pub expect: Expect,
    pub rows: Vec<Row>,
    pub verdict: Verdict,
    pub calibration: Vec<(String, f64)>,
    /// Extra files (name, contents) written next to the reports.
    pub files: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    /// Added to every curvature bound before running.
    pub inflate_r: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub results: Vec<ExperimentResult>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        exit_code(&self.results)
    }
}

/// 0 when every experiment is ok, 1 on any violation or error, otherwise 2 if something is inconclusive.
pub fn exit_code(results: &[ExperimentResult]) -> i32 {
    if results.iter().any(|r| matches!(r.verdict, Verdict::Violated | Verdict::Error(_))) {
        1
    } else if results.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        2
    } else {
        0
    }
}

/// Command line beats the environment, which beats the config file.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&cfg.output_dir),
    }
}

pub fn inflate_r(cfg: &mut RunConfig, delta: f64) {
    for c in &mut cfg.curvatures {
        c.r += delta;
    }
}

/// Executes, writes the reports and returns the results.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    if let Some(d) = opts.inflate_r {
        inflate_r(&mut cfg, d);
    }
    cfg.validate()?;
    let out_dir = resolve_out_dir(opts.out_dir.as_deref(), &cfg);
    let results = execute(&cfg)?;
    write_reports(&results, &out_dir)?;
    Ok(RunOutcome { results, out_dir })
}

fn anchor_for(check: &str) -> &'static str {
    anchor::ALL.iter().copied().find(|a| *a == check).unwrap_or(match check {
        "identities" => anchor::IDENTITY,
        "contraction-ii" => anchor::CONTRACTION_SINH,
        "contraction-iii" => anchor::CONTRACTION_SQUARE,
        "two-time" => anchor::TWO_TIME,
        "refinement" => anchor::GEODESIC_REFINEMENT,
        "converse" => anchor::CONVERSE_ENTROPY,
        _ => anchor::CD_POINTWISE,
    })
}

/// Runs every experiment: ungated ones first (concurrently), then those gated on an
/// equivalence experiment. Results come back in declaration order.
pub fn execute(cfg: &RunConfig) -> Result<Vec<ExperimentResult>> {
    let spaces = build_spaces(cfg)?;
    let ctx = Context { cfg, spaces: &spaces };
    let run_one = |i: usize| -> ExperimentResult { ctx.experiment(i) };
    let ungated: Vec<usize> = (0..cfg.experiments.len()).filter(|i| cfg.experiments[*i].gate.is_none()).collect();
    let mut results: BTreeMap<usize, ExperimentResult> =
        ungated.par_iter().map(|&i| (i, run_one(i))).collect::<Vec<_>>().into_iter().collect();
    let labels: BTreeMap<String, usize> =
        cfg.experiments.iter().enumerate().map(|(i, e)| (e.label(i), i)).collect();
    let gated: Vec<(usize, ExperimentResult)> = (0..cfg.experiments.len())
        .filter(|i| cfg.experiments[*i].gate.is_some())
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&i| {
            let e = &cfg.experiments[i];
            let gate = e.gate.as_deref().unwrap();
            let open = labels.get(gate).and_then(|g| results.get(g)).is_some_and(|r| r.verdict == Verdict::Ok);
            if open {
                (i, run_one(i))
            } else {
                let reason = format!("gate {gate:?} did not pass");
                let row = Row { report: CheckReport::skipped(e.check.clone(), anchor_for(&e.check), &reason), expected: e.expect };
                (i, ctx.result(i, vec![row], Some(Verdict::Inconclusive), Vec::new(), Vec::new()))
            }
        })
        .collect();
    results.extend(gated);
    Ok(results.into_values().collect())
}

fn build_spaces(cfg: &RunConfig) -> Result<BTreeMap<String, Space<f64>>> {
    let used: Vec<&SpaceConfig> = cfg
        .spaces
        .iter()
        .filter(|s| cfg.experiments.iter().any(|e| e.space.as_deref() == Some(s.name.as_str())))
        .collect();
    used.par_iter()
        .map(|s| Ok((s.name.clone(), Space::new(space_grid(s, s.n)?)?)))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

fn space_grid(s: &SpaceConfig, n: usize) -> Result<WeightedGrid<f64>> {
    build_grid(s.kind.into(), n, s.domain(), &s.potential()?, s.normalize)
}

struct Context<'a> {
    cfg: &'a RunConfig,
    spaces: &'a BTreeMap<String, Space<f64>>,
}

/// What a single check produces before the verdict is settled.
#[derive(Default)]
struct Produced {
    rows: Vec<Row>,
    verdict: Option<Verdict>,
    calibration: Vec<(String, f64)>,
    files: Vec<(String, Vec<u8>)>,
}

impl Produced {
    fn plain(rows: Vec<CheckReport>, expected: Expect) -> Self {
        Self { rows: rows.into_iter().map(|report| Row { report, expected }).collect(), ..Self::default() }
    }
}

fn verdict_of(rows: &[Row], expect: Expect) -> Verdict {
    let failing = |r: &Row| !r.report.pass && r.report.status != Status::Skipped;
    match expect {
        Expect::Fail => {
            if rows.iter().any(failing) {
                Verdict::Ok
            } else {
                Verdict::Violated
            }
        }
        Expect::Pass => {
            if rows.iter().any(|r| failing(r) && r.report.status != Status::Inconclusive) {
                Verdict::Violated
            } else if rows.iter().any(|r| r.report.status == Status::Inconclusive) {
                Verdict::Inconclusive
            } else {
                Verdict::Ok
            }
        }
    }
}

impl Context<'_> {
    fn result(
        &self,
        index: usize,
        rows: Vec<Row>,
        verdict: Option<Verdict>,
        calibration: Vec<(String, f64)>,
        files: Vec<(String, Vec<u8>)>,
    ) -> ExperimentResult {
        let e = &self.cfg.experiments[index];
        let verdict = verdict.unwrap_or_else(|| verdict_of(&rows, e.expect));
        ExperimentResult { label: e.label(index), check: e.check.clone(), expect: e.expect, rows, verdict, calibration, files }
    }

    fn experiment(&self, index: usize) -> ExperimentResult {
        let e = &self.cfg.experiments[index];
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_add(index as u64));
        match self.dispatch(e, index, &mut rng) {
            Ok(mut p) => {
                if let Some(eq) = e.equality_tol {
                    for row in &mut p.rows {
                        let r = &mut row.report;
                        r.tol = eq;
                        let pass = r.margin.abs() <= eq;
                        *r = r.clone().with_verdict(pass);
                    }
                }
                self.result(index, p.rows, p.verdict, p.calibration, p.files)
            }
            Err(err) => {
                let msg = err.to_string();
                let row = Row { report: CheckReport::skipped(e.check.clone(), anchor_for(&e.check), &msg), expected: e.expect };
                self.result(index, vec![row], Some(Verdict::Error(msg)), Vec::new(), Vec::new())
            }
        }
    }

    fn space(&self, e: &ExperimentConfig) -> Result<&Space<f64>> {
        let name = e.space.as_deref().ok_or_else(|| Error::Parameter(format!("{} needs a space", e.check)))?;
        self.spaces.get(name).ok_or_else(|| Error::Parameter(format!("space {name:?} was not built")))
    }

    fn params(&self, e: &ExperimentConfig) -> Result<CurvatureParams<f64>> {
        let c = self.curvature(e)?;
        CurvatureParams::new(c.r, c.m)
    }

    fn curvature(&self, e: &ExperimentConfig) -> Result<&crate::config::CurvatureConfig> {
        let name = e.curvature.as_deref().ok_or_else(|| Error::Parameter(format!("{} needs a curvature", e.check)))?;
        self.cfg.curvature(name).ok_or_else(|| Error::Parameter(format!("undeclared curvature {name:?}")))
    }

    fn density(&self, name: &str, grid: &WeightedGrid<f64>, rng: &mut ChaCha8Rng) -> Result<GridDensity<f64>> {
        let d = self.cfg.density(name).ok_or_else(|| Error::Parameter(format!("undeclared density {name:?}")))?;
        match d.preset(grid.n) {
            Some(p) => p.build(grid),
            None => suites::random_density(grid, d.modes, rng),
        }
    }

    fn densities(&self, e: &ExperimentConfig, grid: &WeightedGrid<f64>, rng: &mut ChaCha8Rng) -> Result<Vec<GridDensity<f64>>> {
        e.densities.iter().map(|n| self.density(n, grid, rng)).collect()
    }

    fn family(&self, e: &ExperimentConfig, grid: &WeightedGrid<f64>, rng: &mut ChaCha8Rng) -> Result<Vec<GridDensity<f64>>> {
        if e.densities.is_empty() {
            harness::reference_family(grid)
        } else {
            self.densities(e, grid, rng)
        }
    }

    fn dispatch(&self, e: &ExperimentConfig, index: usize, rng: &mut ChaCha8Rng) -> Result<Produced> {
        let check = e.check.as_str();
        let tol = Tolerance { c_dx: e.tol_dx.unwrap_or(5.0), c_du: e.tol_du.unwrap_or(5.0) };
        let rows = match check {
            "identities" => suites::identity_suite(self.space(e)?, e.count.unwrap_or(200), rng)?,
            "w2-oracle" => {
                let s = self.cfg.space(e.space.as_deref().unwrap_or_default()).unwrap();
                let sizes = if e.sizes.is_empty() { vec![s.n] } else { e.sizes.clone() };
                let mut rows = Vec::new();
                for n in sizes {
                    rows.extend(suites::w2_oracle_suite(&space_grid(s, n)?, e.count.unwrap_or(50), rng)?);
                }
                rows
            }
            "hamilton-jacobi" => {
                let grid = &self.space(e)?.grid;
                let psi = suites::random_smooth(grid, 3, rng);
                let c = e.tol_dx.unwrap_or(10.0);
                e.times.iter().map(|s| suites::hamilton_jacobi_check(grid, &psi, *s, c)).collect::<Result<_>>()?
            }
            "cd-pointwise" => {
                let space = self.space(e)?;
                let params = self.params(e)?;
                let fam = default_family(&space.grid, params.m);
                vec![check_pointwise_cd(&space.gen, &space.grid, params, &fam, tol.c_dx * space.dx())?]
            }
            "cd-weak" => {
                let space = self.space(e)?;
                let params = self.params(e)?;
                let fam = default_family(&space.grid, params.m);
                let mut rows = Vec::new();
                for (name, g) in e.densities.iter().zip(self.densities(e, &space.grid, rng)?) {
                    let mut worst: Option<CheckReport> = None;
                    for f in &fam {
                        let r = check_weak_cd(&space.gen, &space.grid, params, f, g.values(), tol.c_dx * space.dx())?;
                        if worst.as_ref().is_none_or(|w| r.margin < w.margin) {
                            worst = Some(r);
                        }
                    }
                    rows.push(worst.unwrap().with("density", name));
                }
                rows
            }
            "mesh-convergence" => {
                let s = self.cfg.space(e.space.as_deref().unwrap_or_default()).unwrap();
                let params = self.params(e)?;
                vec![suites::mesh_convergence(
                    s.kind.into(),
                    s.domain(),
                    &s.potential()?,
                    params.m,
                    &e.sizes,
                    e.target.unwrap_or(0.0),
                    e.min_order.unwrap_or(0.9),
                )?]
            }
            "contraction-ii" | "contraction-iii" | "two-time" | "evi" => {
                let space = self.space(e)?;
                let params = self.params(e)?;
                let fam = self.family(e, &space.grid, rng)?;
                pairwise(space, params, &fam, &e.times, tol, e.intervals, check)?
            }
            "equivalence" => return self.equivalence(e, tol, rng),
            "refinement" => {
                let space = self.space(e)?;
                let params = self.params(e)?;
                let d = self.densities(e, &space.grid, rng)?;
                let levels = if e.refine.is_empty() { vec![1, 2, 4] } else { e.refine.clone() };
                let mut rows = Vec::new();
                for &t in &e.times {
                    rows.extend(harness::refinement_prop21(space, &d[0], &d[1], t, params, &levels, tol)?);
                }
                rows
            }
            "converse" => {
                let space = self.space(e)?;
                let g = self.density(&e.densities[0], &space.grid, rng)?;
                let f = sample_function(e.function.as_ref().unwrap(), &space.grid);
                let mut opts = ConverseOptions::new(space.dx());
                if !e.s_list.is_empty() {
                    opts.s_list = e.s_list.clone();
                }
                if !e.u_list.is_empty() {
                    opts.u_list = e.u_list.clone();
                }
                if let Some(c) = e.tol_dx {
                    opts.tol = c * space.dx();
                }
                let mut rows = Vec::new();
                for &t in &e.times {
                    rows.extend(harness::converse_estimates(space, &g, &f, t, &opts)?);
                }
                rows
            }
            "gradflow-convexity" | "gradflow-contraction" | "gradflow-converse" => {
                return self.gradflow(e, index);
            }
            _ => return self.functional(e, index, rng),
        };
        Ok(Produced::plain(rows, e.expect))
    }

    fn equivalence(&self, e: &ExperimentConfig, tol: Tolerance, rng: &mut ChaCha8Rng) -> Result<Produced> {
        let space = self.space(e)?;
        let params = self.params(e)?;
        let c = self.curvature(e)?;
        let fam = self.family(e, &space.grid, rng)?;
        let fals = Falsification { delta_scale: c.delta_scale, delta_shift: c.delta_shift, kappa: c.kappa };
        let out = harness::equivalence_report(space, params, &fam, &e.times, tol, fals)?;
        let mut rows: Vec<Row> = out.forward.into_iter().map(|report| Row { report, expected: Expect::Pass }).collect();
        for run in &out.falsification {
            let tag = |r: &CheckReport| {
                let mut r = r.clone().with("R", run.params.0).with("m", run.params.1);
                r.name = format!("{}[{}]", r.name, run.label);
                Row { report: r, expected: Expect::Fail }
            };
            rows.push(tag(&run.pointwise));
            if let Some(w) = &run.worst_contraction {
                rows.push(tag(&w.clone().with("failures", run.contraction_failures)));
            }
        }
        let verdict = if out.aggregate.pass { Verdict::Ok } else { Verdict::Violated };
        rows.push(Row { report: out.aggregate, expected: Expect::Pass });
        let name = e.space.clone().unwrap_or_default();
        Ok(Produced { rows, verdict: Some(verdict), calibration: vec![(format!("r_star[{name}]"), out.r_star)], files: Vec::new() })
    }

    fn gradflow(&self, e: &ExperimentConfig, index: usize) -> Result<Produced> {
        let c = self.curvature(e)?;
        let (r, m) = (c.r, c.m);
        let pot = potential_spec(e.potential.as_ref().unwrap())?;
        let seed = self.cfg.seed.wrapping_add(index as u64);
        let convexity = || -> Result<gradflow::ConvexityCheck<f64>> {
            let cube = e.cube.ok_or_else(|| Error::Parameter("cube required".into()))?;
            gradflow::check_cd_convexity(&pot, r, m, (cube[0], cube[1]), e.samples.unwrap_or(2000), e.step.unwrap_or(1e-3), seed)
        };
        let mut files = Vec::new();
        let rows = match e.check.as_str() {
            "gradflow-convexity" => {
                let c = convexity()?;
                let w = &c.witness;
                vec![c.report.with("witness_x", format!("{:?}", w.x)).with("witness_h", format!("{:?}", w.h)).with("witness_s", w.s)]
            }
            "gradflow-contraction" => {
                let t_end = e.t_end.unwrap();
                let dt = e.dt.unwrap_or(1e-3);
                let du = e.du.unwrap_or(10.0 * dt);
                if let Some(name) = &e.dump {
                    let mut buf = Vec::new();
                    gradflow::flow_rk4(&pot, &e.x0, t_end, dt)?.write_csv(&pot, &mut buf)?;
                    files.push((name.clone(), buf));
                }
                gradflow::check_flow_contraction(&pot, r, m, &e.x0, &e.y0, t_end, dt, du)?
            }
            _ => {
                let (x, h) = if e.x0.is_empty() {
                    let w = convexity()?.witness;
                    let x: Vec<f64> = w.x.iter().zip(&w.h).map(|(a, b)| a + w.s * b).collect();
                    (x, w.h)
                } else {
                    (e.x0.clone(), e.direction.clone())
                };
                let eps = if e.eps.is_empty() { vec![1e-2, 5e-3, 2.5e-3] } else { e.eps.clone() };
                vec![gradflow::check_converse_taylor(&pot, r, m, &x, &h, &eps)?]
            }
        };
        let mut p = Produced::plain(rows, e.expect);
        p.files = files;
        Ok(p)
    }

    fn functional(&self, e: &ExperimentConfig, index: usize, rng: &mut ChaCha8Rng) -> Result<Produced> {
        let space = self.space(e)?;
        let fam = self.densities(e, &space.grid, rng)?;
        let mut rows = Vec::new();
        for (name, f) in e.densities.iter().zip(&fam) {
            let tag = |r: CheckReport| r.with("density", name);
            match e.check.as_str() {
                "entropy-energy" => rows.push(tag(funcineq::check_entropy_energy(space, self.params(e)?, f)?)),
                "log-sobolev" => rows.push(tag(funcineq::check_log_sobolev(space, self.params(e)?, f)?)),
                "fisher-decay" => rows.extend(funcineq::check_fisher_decay(space, self.params(e)?, f, &e.times)?.into_iter().map(tag)),
                "fisher-differential" => {
                    rows.extend(funcineq::check_fisher_differential(space, self.params(e)?, f, &e.times)?.into_iter().map(tag))
                }
                "entropy-creation" => {
                    rows.extend(funcineq::check_entropy_creation(space, self.params(e)?, f, &e.times)?.into_iter().map(tag))
                }
                "de-bruijn" => {
                    for &t in &e.times {
                        rows.push(tag(funcineq::check_de_bruijn(space, f, t, e.intervals.unwrap_or(QUAD_INTERVALS))?));
                    }
                }
                "hwi" => rows.push(tag(funcineq::check_hwi(space, self.params(e)?.m, f)?)),
                "hwi-regularization" => {
                    let c = e.hwi_c.unwrap_or_else(funcineq::hwi_default_constant);
                    rows.extend(funcineq::check_hwi_regularization(space, self.params(e)?.m, f, &e.times, c)?.into_iter().map(tag))
                }
                "metric-derivative" => {
                    let deltas = if e.deltas.is_empty() { vec![1e-3, 5e-4, 2.5e-4] } else { e.deltas.clone() };
                    for &t in &e.times {
                        rows.push(tag(funcineq::check_metric_derivative(space, f, t, &deltas)?));
                    }
                }
                other => return Err(Error::Parameter(format!("unknown check {other:?}"))),
            }
        }
        let mut out = Produced::plain(rows, e.expect);
        if e.check == "hwi-regularization" {
            let c = funcineq::calibrate_hwi_constant(space, self.params(e)?.m, &fam, &e.times)?;
            out.calibration.push((format!("hwi_c[{}]", e.label(index)), c));
        }
        Ok(out)
    }
}

/// Rows of one contraction-type check over the pairs of a family, in pair order.
fn pairwise(
    space: &Space<f64>,
    params: CurvatureParams<f64>,
    fam: &[GridDensity<f64>],
    times: &[f64],
    tol: Tolerance,
    intervals: Option<usize>,
    check: &str,
) -> Result<Vec<CheckReport>> {
    let ordered = check == "evi";
    let pairs: Vec<(usize, usize)> = (0..fam.len())
        .flat_map(|i| (0..fam.len()).map(move |j| (i, j)))
        .filter(|(i, j)| if ordered { i != j } else { i < j })
        .collect();
    let chunks: Vec<Vec<CheckReport>> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<Vec<CheckReport>> {
            let mut exp = ContractionExperiment::new(space, fam[i].clone(), fam[j].clone(), params, times.to_vec())?
                .with_tolerance(tol);
            if let Some(k) = intervals {
                exp.intervals = k;
            }
            let rows = match check {
                "contraction-ii" => harness::check_contraction_ii(&exp)?,
                "contraction-iii" => harness::check_contraction_iii(&exp)?,
                "evi" => harness::check_evi(&exp)?,
                _ => times
                    .windows(2)
                    .map(|w| harness::check_two_time_eks(space, &fam[i], &fam[j], w[0], w[1], params, tol))
                    .collect::<Result<_>>()?,
            };
            Ok(rows.into_iter().map(|r| r.with("pair", format!("{i}-{j}"))).collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// `amp·sin(k·ω·x + phase)` (or cosine) at the nodes, `ω = 2π/length`.
pub fn sample_function(f: &FunctionConfig, grid: &WeightedGrid<f64>) -> Vec<f64> {
    let omega = std::f64::consts::TAU / grid.length();
    grid.sample(|x| {
        let arg = f.k * omega * x + f.phase;
        f.amp
            * match f.kind {
                Trig::Sin => arg.sin(),
                Trig::Cos => arg.cos(),
            }
    })
}

pub fn potential_spec(p: &PotentialConfig) -> Result<PotentialSpec<f64>> {
    Ok(match p.kind.as_str() {
        "quadratic" => PotentialSpec::Quadratic { dim: p.dim, scale: p.scale },
        "diagonal" => PotentialSpec::Diagonal { coeffs: p.coeffs.clone() },
        "constant" => PotentialSpec::Constant { dim: p.dim, value: p.scale },
        "double-well" => PotentialSpec::DoubleWell,
        other => return Err(Error::Parameter(format!("unknown potential {other:?}"))),
    })
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn detail(r: &CheckReport) -> String {
    r.meta.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// `checks.csv` bytes: one row per report, declaration order.
pub fn checks_csv(results: &[ExperimentResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for res in results {
        for row in &res.rows {
            let r = &row.report;
            let expected = match row.expected {
                Expect::Pass => "pass",
                Expect::Fail => "fail",
            };
            w.write_record([
                res.label.clone(),
                r.name.clone(),
                r.anchor.to_string(),
                r.t.map(num).unwrap_or_default(),
                num(r.lhs),
                num(r.rhs),
                num(r.margin),
                num(r.tol),
                r.pass.to_string(),
                expected.to_string(),
                r.status.to_string(),
                detail(r),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Plain-text totals, per-experiment verdicts and calibration constants.
pub fn summary_text(results: &[ExperimentResult]) -> String {
    let mut s = String::new();
    let count = |v: fn(&Verdict) -> bool| results.iter().filter(|r| v(&r.verdict)).count();
    let rows: Vec<&Row> = results.iter().flat_map(|r| &r.rows).collect();
    let by_status = |st: Status| rows.iter().filter(|r| r.report.status == st).count();
    let _ = writeln!(s, "experiments: {}", results.len());
    let _ = writeln!(s, "  ok: {}", count(|v| *v == Verdict::Ok));
    let _ = writeln!(s, "  violated: {}", count(|v| *v == Verdict::Violated));
    let _ = writeln!(s, "  inconclusive: {}", count(|v| *v == Verdict::Inconclusive));
    let _ = writeln!(s, "  error: {}", count(|v| matches!(v, Verdict::Error(_))));
    let _ = writeln!(s, "checks: {}", rows.len());
    for st in [Status::Pass, Status::Fail, Status::Inconclusive, Status::Skipped] {
        let _ = writeln!(s, "  {st}: {}", by_status(st));
    }
    let _ = writeln!(s, "exit status: {}", exit_code(results));
    let _ = writeln!(s, "\n[experiments]");
    for r in results {
        let passed = r.rows.iter().filter(|x| x.report.status == Status::Pass).count();
        let expect = if r.expect == Expect::Fail { " (expected to fail)" } else { "" };
        let _ = writeln!(s, "{} [{}]: {}{expect}, {passed}/{} rows pass", r.label, r.check, r.verdict, r.rows.len());
    }
    let calib: Vec<&(String, f64)> = results.iter().flat_map(|r| &r.calibration).collect();
    if !calib.is_empty() {
        let _ = writeln!(s, "\n[calibration]");
        for (k, v) in calib {
            let _ = writeln!(s, "{k} = {v:e}");
        }
    }
    s
}

pub fn write_reports(results: &[ExperimentResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("checks.csv"), checks_csv(results)?)?;
    std::fs::write(dir.join("summary.txt"), summary_text(results))?;
    for r in results {
        for (name, bytes) in &r.files {
            std::fs::write(dir.join(name), bytes)?;
        }
    }
    Ok(())
}

/// Summary of an existing output directory: the stored summary plus every row that was
/// expected to pass and did not.
pub fn report_dir(dir: &Path) -> Result<String> {
    let mut out = std::fs::read_to_string(dir.join("summary.txt"))?;
    let mut rdr = csv::Reader::from_path(dir.join("checks.csv"))?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Io(format!("{}: unexpected header", dir.join("checks.csv").display())));
    }
    let mut unexpected = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if &rec[8] != "true" && &rec[9] == "pass" && &rec[10] != "skipped" {
            unexpected.push(format!("{} / {}: margin {} tol {} ({})", &rec[0], &rec[1], &rec[6], &rec[7], &rec[10]));
        }
    }
    let _ = writeln!(out, "\n[failing rows: {}]", unexpected.len());
    for u in unexpected {
        let _ = writeln!(out, "{u}");
    }
    Ok(out)
}
