//! TOML run configuration and its validation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{GridKind, Potential};
use crate::harness::DensityPreset;

/// Check names accepted in `[[experiment]]` blocks.
pub const CHECKS: &[&str] = &[
    "identities",
    "w2-oracle",
    "hamilton-jacobi",
    "cd-pointwise",
    "cd-weak",
    "mesh-convergence",
    "contraction-ii",
    "contraction-iii",
    "two-time",
    "evi",
    "equivalence",
    "refinement",
    "converse",
    "gradflow-convexity",
    "gradflow-contraction",
    "gradflow-converse",
    "entropy-energy",
    "log-sobolev",
    "fisher-decay",
    "fisher-differential",
    "de-bruijn",
    "entropy-creation",
    "hwi",
    "hwi-regularization",
    "metric-derivative",
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: String,
    #[serde(default, rename = "space")]
    pub spaces: Vec<SpaceConfig>,
    #[serde(default, rename = "curvature")]
    pub curvatures: Vec<CurvatureConfig>,
    #[serde(default, rename = "density")]
    pub densities: Vec<DensityConfig>,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<ExperimentConfig>,
}

fn default_output() -> String {
    "wcontract-out".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Circle,
    Interval,
}

impl From<SpaceKind> for GridKind {
    fn from(k: SpaceKind) -> Self {
        match k {
            SpaceKind::Circle => GridKind::Circle,
            SpaceKind::Interval => GridKind::Interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub name: String,
    pub kind: SpaceKind,
    pub n: usize,
    /// Defaults to `[0, 2π]` on a circle and `[−0.5, 0.5]` on an interval.
    pub domain: Option<[f64; 2]>,
    /// `"zero"`, `"quadratic"` or `"polynomial"` (with `coefficients`).
    #[serde(default = "default_potential")]
    pub potential: String,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn default_potential() -> String {
    "zero".into()
}

fn yes() -> bool {
    true
}

impl SpaceConfig {
    pub fn new(name: &str, kind: SpaceKind, n: usize) -> Self {
        Self { name: name.into(), kind, n, domain: None, potential: default_potential(), coefficients: Vec::new(), normalize: true }
    }

    pub fn domain(&self) -> (f64, f64) {
        match (self.domain, self.kind) {
            (Some([a, b]), _) => (a, b),
            (None, SpaceKind::Circle) => (0.0, std::f64::consts::TAU),
            (None, SpaceKind::Interval) => (-0.5, 0.5),
        }
    }

    pub fn potential(&self) -> Result<Potential<f64>> {
        match self.potential.as_str() {
            "zero" => Ok(Potential::Zero),
            "quadratic" => Ok(Potential::Quadratic),
            "polynomial" => Ok(Potential::Polynomial(self.coefficients.clone())),
            other => Err(Error::Parameter(format!("unknown potential {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    pub name: String,
    pub r: f64,
    /// `inf` is accepted.
    pub m: f64,
    #[serde(default = "half")]
    pub delta_scale: f64,
    #[serde(default = "tenth")]
    pub delta_shift: f64,
    #[serde(default = "ten")]
    pub kappa: f64,
}

impl CurvatureConfig {
    pub fn new(name: &str, r: f64, m: f64) -> Self {
        Self { name: name.into(), r, m, delta_scale: half(), delta_shift: tenth(), kappa: ten() }
    }
}

fn half() -> f64 {
    0.5
}
fn tenth() -> f64 {
    0.1
}
fn ten() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub name: String,
    /// `uniform`, `sin`, `cos`, `von-mises`, `gaussian`, `linear`, `dirac` or `random`.
    pub profile: String,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "half")]
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "tenth")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub slope: f64,
    /// Node index for `dirac`; `None` picks the middle node.
    pub node: Option<usize>,
    /// Number of Fourier modes for `random`.
    #[serde(default = "three")]
    pub modes: usize,
}

fn one() -> f64 {
    1.0
}
fn three() -> usize {
    3
}

impl DensityConfig {
    /// A density with every shape parameter at its default.
    pub fn new(name: &str, profile: &str) -> Self {
        Self {
            name: name.into(),
            profile: profile.into(),
            k: one(),
            amp: half(),
            phase: 0.0,
            center: 0.0,
            kappa: one(),
            sigma: tenth(),
            slope: one(),
            node: None,
            modes: three(),
        }
    }

    /// The preset for a grid of `n` nodes (`None` for `random`).
    pub fn preset(&self, n: usize) -> Option<DensityPreset> {
        Some(match self.profile.as_str() {
            "uniform" => DensityPreset::Uniform,
            "sin" => DensityPreset::Sin { k: self.k, amp: self.amp, phase: self.phase },
            "cos" => DensityPreset::Cos { k: self.k, amp: self.amp, phase: self.phase },
            "von-mises" => DensityPreset::VonMises { center: self.center, kappa: self.kappa },
            "gaussian" => DensityPreset::Gaussian { center: self.center, sigma: self.sigma },
            "linear" => DensityPreset::Linear { slope: self.slope },
            "dirac" => DensityPreset::Dirac { node: self.node.unwrap_or(n / 2) },
            _ => return None,
        })
    }
}

const PROFILES: &[&str] = &["uniform", "sin", "cos", "von-mises", "gaussian", "linear", "dirac", "random"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

/// `amp·sin(k·ω·x + phase)` or the cosine analogue, `ω = 2π/length`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    pub kind: Trig,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "one")]
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trig {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// `quadratic`, `diagonal`, `constant` or `double-well`.
    pub kind: String,
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub check: String,
    /// Unique label; defaults to `check#index`.
    pub label: Option<String>,
    pub space: Option<String>,
    pub curvature: Option<String>,
    #[serde(default)]
    pub densities: Vec<String>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub expect: Expect,
    /// Simpson intervals on `[0, t]`.
    pub intervals: Option<usize>,
    /// Label of an `equivalence` experiment that must succeed before this one runs.
    pub gate: Option<String>,
    pub tol_dx: Option<f64>,
    pub tol_du: Option<f64>,
    /// Turns every row into an equality test `|margin| ≤ equality_tol`.
    pub equality_tol: Option<f64>,
    pub count: Option<usize>,
    #[serde(default)]
    pub sizes: Vec<usize>,
    pub target: Option<f64>,
    pub min_order: Option<f64>,
    #[serde(default)]
    pub refine: Vec<usize>,
    /// Test function of `converse`.
    pub function: Option<FunctionConfig>,
    #[serde(default)]
    pub s_list: Vec<f64>,
    #[serde(default)]
    pub u_list: Vec<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    pub hwi_c: Option<f64>,
    pub potential: Option<PotentialConfig>,
    pub cube: Option<[f64; 2]>,
    #[serde(default)]
    pub x0: Vec<f64>,
    #[serde(default)]
    pub y0: Vec<f64>,
    #[serde(default)]
    pub direction: Vec<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub du: Option<f64>,
    pub samples: Option<usize>,
    /// Finite-difference step of the convexity check.
    pub step: Option<f64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    /// File name (inside the output directory) for a trajectory dump.
    pub dump: Option<String>,
}

impl ExperimentConfig {
    pub fn new(check: &str) -> Self {
        Self { check: check.into(), ..Self::default() }
    }

    pub fn label(&self, index: usize) -> String {
        self.label.clone().unwrap_or_else(|| format!("{}#{index}", self.check))
    }
}

/// Checks that fall back to the built-in reference family when `densities` is empty.
pub const CONTRACTION_CHECKS: &[&str] = &["contraction-ii", "contraction-iii", "two-time", "evi", "equivalence"];

fn needs_space(check: &str) -> bool {
    !check.starts_with("gradflow")
}

fn needs_curvature(check: &str) -> bool {
    matches!(
        check,
        "cd-pointwise"
            | "cd-weak"
            | "mesh-convergence"
            | "contraction-ii"
            | "contraction-iii"
            | "two-time"
            | "evi"
            | "equivalence"
            | "refinement"
            | "gradflow-convexity"
            | "gradflow-contraction"
            | "gradflow-converse"
            | "entropy-energy"
            | "log-sobolev"
            | "fisher-decay"
            | "fisher-differential"
            | "entropy-creation"
            | "hwi"
            | "hwi-regularization"
    )
}

fn min_densities(check: &str) -> usize {
    match check {
        "contraction-ii" | "contraction-iii" | "two-time" | "evi" | "equivalence" | "refinement" => 2,
        "cd-weak" | "converse" | "entropy-energy" | "log-sobolev" | "fisher-decay" | "fisher-differential"
        | "de-bruijn" | "entropy-creation" | "hwi" | "hwi-regularization" | "metric-derivative" => 1,
        _ => 0,
    }
}

fn needs_times(check: &str) -> bool {
    matches!(
        check,
        "hamilton-jacobi"
            | "contraction-ii"
            | "contraction-iii"
            | "two-time"
            | "evi"
            | "equivalence"
            | "refinement"
            | "converse"
            | "fisher-decay"
            | "fisher-differential"
            | "de-bruijn"
            | "entropy-creation"
            | "hwi-regularization"
            | "metric-derivative"
    )
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    pub fn space(&self, name: &str) -> Option<&SpaceConfig> {
        self.spaces.iter().find(|s| s.name == name)
    }

    pub fn curvature(&self, name: &str) -> Option<&CurvatureConfig> {
        self.curvatures.iter().find(|c| c.name == name)
    }

    pub fn density(&self, name: &str) -> Option<&DensityConfig> {
        self.densities.iter().find(|d| d.name == name)
    }

    /// Every validation error, not just the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, s) in self.spaces.iter().enumerate() {
            let at = format!("space[{i}] ({})", s.name);
            if !seen.insert(("space", s.name.clone())) {
                errs.push(format!("{at}.name: duplicate"));
            }
            if s.n < 8 {
                errs.push(format!("{at}.n: need at least 8 nodes, got {}", s.n));
            }
            let (a, b) = s.domain();
            if !(a.is_finite() && b.is_finite() && b > a) {
                errs.push(format!("{at}.domain: invalid [{a}, {b}]"));
            }
            if let Err(e) = s.potential() {
                errs.push(format!("{at}.potential: {e}"));
            }
            if s.potential == "polynomial" && s.coefficients.iter().any(|c| !c.is_finite()) {
                errs.push(format!("{at}.coefficients: non-finite value"));
            }
        }
        for (i, c) in self.curvatures.iter().enumerate() {
            let at = format!("curvature[{i}] ({})", c.name);
            if !seen.insert(("curvature", c.name.clone())) {
                errs.push(format!("{at}.name: duplicate"));
            }
            if !c.r.is_finite() {
                errs.push(format!("{at}.r: must be finite, got {}", c.r));
            }
            if !(c.m > 0.0) {
                errs.push(format!("{at}.m: must be positive, got {}", c.m));
            }
            if !(c.kappa > 1.0) || !c.delta_scale.is_finite() || !(c.delta_shift >= 0.0) {
                errs.push(format!("{at}: falsification needs kappa > 1, finite delta_scale, delta_shift >= 0"));
            }
        }
        for (i, d) in self.densities.iter().enumerate() {
            let at = format!("density[{i}] ({})", d.name);
            if !seen.insert(("density", d.name.clone())) {
                errs.push(format!("{at}.name: duplicate"));
            }
            if !PROFILES.contains(&d.profile.as_str()) {
                errs.push(format!("{at}.profile: unknown profile {:?}", d.profile));
            }
            for (k, v) in [("k", d.k), ("amp", d.amp), ("phase", d.phase), ("center", d.center), ("kappa", d.kappa), ("slope", d.slope)] {
                if !v.is_finite() {
                    errs.push(format!("{at}.{k}: non-finite value"));
                }
            }
            if !(d.sigma > 0.0) {
                errs.push(format!("{at}.sigma: must be positive"));
            }
        }
        let mut labels = BTreeMap::new();
        for (i, e) in self.experiments.iter().enumerate() {
            let label = e.label(i);
            if labels.insert(label.clone(), e.check.clone()).is_some() {
                errs.push(format!("experiment[{i}].label: duplicate {label:?}"));
            }
        }
        for (i, e) in self.experiments.iter().enumerate() {
            let at = format!("experiment[{i}]");
            if !CHECKS.contains(&e.check.as_str()) {
                errs.push(format!("{at}.check: unknown check {:?}", e.check));
                continue;
            }
            let check = e.check.as_str();
            match (&e.space, needs_space(check)) {
                (Some(s), _) if self.space(s).is_none() => errs.push(format!("{at}.space: undeclared space {s:?}")),
                (None, true) => errs.push(format!("{at}.space: required by {check}")),
                _ => {}
            }
            match (&e.curvature, needs_curvature(check)) {
                (Some(c), _) if self.curvature(c).is_none() => {
                    errs.push(format!("{at}.curvature: undeclared curvature {c:?}"))
                }
                (None, true) => errs.push(format!("{at}.curvature: required by {check}")),
                _ => {}
            }
            for d in &e.densities {
                if self.density(d).is_none() {
                    errs.push(format!("{at}.densities: undeclared density {d:?}"));
                }
            }
            let family_default = CONTRACTION_CHECKS.contains(&check) && e.densities.is_empty();
            if !family_default && e.densities.len() < min_densities(check) {
                errs.push(format!("{at}.densities: {check} needs at least {}", min_densities(check)));
            }
            if check == "refinement" && e.densities.len() != 2 {
                errs.push(format!("{at}.densities: refinement takes exactly one pair"));
            }
            if check == "converse" && e.function.is_none() {
                errs.push(format!("{at}.function: required by converse"));
            }
            if needs_times(check) && e.times.is_empty() {
                errs.push(format!("{at}.times: required by {check}"));
            }
            if e.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                errs.push(format!("{at}.times: must be finite and nonnegative"));
            }
            if e.times.windows(2).any(|w| w[1] < w[0]) {
                errs.push(format!("{at}.times: must be sorted"));
            }
            for (k, v) in [("tol_dx", e.tol_dx), ("tol_du", e.tol_du), ("equality_tol", e.equality_tol)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        errs.push(format!("{at}.{k}: tolerances must be positive, got {v}"));
                    }
                }
            }
            if e.intervals.is_some_and(|k| k < 2 || k % 2 != 0) {
                errs.push(format!("{at}.intervals: must be even and at least 2"));
            }
            for (k, v) in [("dt", e.dt), ("du", e.du), ("t_end", e.t_end), ("hwi_c", e.hwi_c), ("step", e.step)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        errs.push(format!("{at}.{k}: must be positive, got {v}"));
                    }
                }
            }
            if e.refine.iter().any(|n| !matches!(n, 1 | 2 | 4 | 8)) {
                errs.push(format!("{at}.refine: levels must be in {{1, 2, 4, 8}}"));
            }
            for (k, list) in [("s_list", &e.s_list), ("eps", &e.eps), ("deltas", &e.deltas)] {
                if list.iter().any(|v| !(*v > 0.0)) || list.windows(2).any(|w| w[1] >= w[0]) {
                    errs.push(format!("{at}.{k}: must be positive and strictly decreasing"));
                }
            }
            if check == "mesh-convergence" && (e.sizes.len() < 2 || e.target.is_none()) {
                errs.push(format!("{at}: mesh-convergence needs at least two sizes and a target"));
            }
            if check == "w2-oracle" && e.sizes.iter().any(|n| *n > crate::transport::LP_MAX_N || *n < 8) {
                errs.push(format!("{at}.sizes: LP oracle sizes must lie in [8, {}]", crate::transport::LP_MAX_N));
            }
            if check.starts_with("gradflow") {
                match &e.potential {
                    None => errs.push(format!("{at}.potential: required by {check}")),
                    Some(p) => {
                        if !["quadratic", "diagonal", "constant", "double-well"].contains(&p.kind.as_str()) {
                            errs.push(format!("{at}.potential.kind: unknown potential {:?}", p.kind));
                        }
                    }
                }
                if check != "gradflow-contraction" && e.cube.is_none() {
                    errs.push(format!("{at}.cube: required by {check}"));
                }
                if check == "gradflow-contraction" && (e.x0.is_empty() || e.y0.is_empty() || e.t_end.is_none()) {
                    errs.push(format!("{at}: gradflow-contraction needs x0, y0 and t_end"));
                }
            }
            if let Some(g) = &e.gate {
                match labels.get(g) {
                    None => errs.push(format!("{at}.gate: unknown experiment {g:?}")),
                    Some(c) if c != "equivalence" => errs.push(format!("{at}.gate: {g:?} is not an equivalence experiment")),
                    _ => {}
                }
                if self.experiments.iter().enumerate().any(|(j, x)| x.label(j) == *g && x.gate.is_some()) {
                    errs.push(format!("{at}.gate: gates cannot be chained"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [[space]]
        name = "c"
        kind = "circle"
        n = 32

        [[curvature]]
        name = "flat"
        r = 0.0
        m = 1.0

        [[experiment]]
        check = "cd-pointwise"
        space = "c"
        curvature = "flat"
    "#;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.experiments.len(), 1);
        assert_eq!(cfg.space("c").unwrap().domain().1, std::f64::consts::TAU);
    }

    #[test]
    fn infinite_m_is_accepted() {
        let cfg = RunConfig::from_toml(&MINIMAL.replace("m = 1.0", "m = inf")).unwrap();
        assert!(cfg.curvatures[0].m.is_infinite());
    }

    #[test]
    fn unknown_check_is_named() {
        let err = RunConfig::from_toml(&MINIMAL.replace("cd-pointwise", "contraction-iv")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("experiment[0].check") && msg.contains("contraction-iv"), "{msg}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = MINIMAL.replace("n = 32", "n = 3").replace("space = \"c\"", "space = \"nowhere\"").replace("m = 1.0", "m = -1.0");
        let Error::Config(errs) = RunConfig::from_toml(&text).unwrap_err() else { panic!() };
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn malformed_numbers_are_rejected() {
        let text = format!("{MINIMAL}\ntimes = [0.5, 0.1]\ntol_dx = -1.0\n");
        let Error::Config(errs) = RunConfig::from_toml(&text).unwrap_err() else { panic!() };
        assert!(errs.iter().any(|e| e.contains("times")));
        assert!(errs.iter().any(|e| e.contains("tol_dx")));
        assert!(RunConfig::from_toml(&MINIMAL.replace("n = 32", "n = \"many\"")).is_err());
    }
}
