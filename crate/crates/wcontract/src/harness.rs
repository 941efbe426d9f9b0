//! Contraction, EVI and equivalence checks assembled from the semigroup,
//! transport and functionals, plus the machinery of the converse argument.

use crate::error::{Error, Result};
use crate::functionals::{entropy_raw, s_r};
use crate::grid::{
    build_generator, check_pointwise_cd, default_family, estimate_best_r, CurvatureParams, GeneratorMatrix,
    GridDensity, GridKind, WeightedGrid,
};
use crate::report::{anchor, CheckReport};
use crate::scalar::{extrapolate_to_zero, simpson, Real};
use crate::semigroup::{spectral, SpectralDecomposition};
use crate::transport::{w2, w2_geodesic, MassModel};

/// A grid together with its generator and spectral decomposition.
#[derive(Debug, Clone)]
pub struct Space<T> {
    pub grid: WeightedGrid<T>,
    pub gen: GeneratorMatrix<T>,
    pub spec: SpectralDecomposition<T>,
}

impl<T: Real> Space<T> {
    pub fn new(grid: WeightedGrid<T>) -> Result<Self> {
        let gen = build_generator(&grid)?;
        let spec = spectral(&gen, &grid)?;
        Ok(Self { grid, gen, spec })
    }

    pub fn dx(&self) -> T {
        self.grid.dx
    }

    /// Transport distance in the cell model.
    pub fn w2(&self, f: &GridDensity<T>, g: &GridDensity<T>) -> Result<T> {
        w2(&self.grid, f, g, MassModel::Cell)
    }

    pub fn evolve(&self, f: &GridDensity<T>, t: T) -> Result<GridDensity<T>> {
        self.spec.evolve_density(&self.grid, f, t)
    }

    pub fn entropy(&self, f: &GridDensity<T>) -> T {
        entropy_raw(&self.grid, f.values())
    }

    /// `Ent(P_u f)` on `u_k = k·t/intervals`, `k = 0..=intervals`.
    pub fn entropy_path(&self, f: &GridDensity<T>, t: T, intervals: usize) -> Result<Vec<T>> {
        let times = quadrature_nodes(t, intervals);
        let path = self.spec.evolve_path(f.values(), &times)?;
        Ok(path
            .into_iter()
            .map(|v| {
                let clipped: Vec<T> = v.into_iter().map(|x| x.max(T::zero())).collect();
                entropy_raw(&self.grid, &clipped)
            })
            .collect())
    }
}

fn quadrature_nodes<T: Real>(t: T, intervals: usize) -> Vec<T> {
    let du = t / T::from_usize(intervals).unwrap();
    (0..=intervals).map(|k| du * T::from_usize(k).unwrap()).collect()
}

/// `tol = c_dx·dx + c_du·du`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub c_dx: f64,
    pub c_du: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { c_dx: 5.0, c_du: 5.0 }
    }
}

impl Tolerance {
    pub fn eval(&self, dx: f64, du: f64) -> f64 {
        self.c_dx * dx + self.c_du * du
    }
}

/// Default number of Simpson intervals on `[0, t]` (`du = t/64`).
pub const QUAD_INTERVALS: usize = 64;

/// Two densities evolved side by side on one space.
#[derive(Debug, Clone)]
pub struct ContractionExperiment<'a, T> {
    pub space: &'a Space<T>,
    pub f: GridDensity<T>,
    pub g: GridDensity<T>,
    pub params: CurvatureParams<T>,
    pub times: Vec<T>,
    pub intervals: usize,
    pub tol: Tolerance,
    /// Central-difference step of the EVI; `None` picks `min(1e−4, t/4)`.
    pub evi_step: Option<T>,
}

impl<'a, T: Real> ContractionExperiment<'a, T> {
    pub fn new(
        space: &'a Space<T>,
        f: GridDensity<T>,
        g: GridDensity<T>,
        params: CurvatureParams<T>,
        times: Vec<T>,
    ) -> Result<Self> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::UnsortedTimes);
        }
        if let Some(t) = times.iter().find(|t| **t < T::zero()) {
            return Err(Error::NegativeTime(t.f64()));
        }
        Ok(Self { space, f, g, params, times, intervals: QUAD_INTERVALS, tol: Tolerance::default(), evi_step: None })
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_params(mut self, params: CurvatureParams<T>) -> Self {
        self.params = params;
        self
    }

    fn du(&self, t: T) -> T {
        t / T::from_usize(self.intervals).unwrap()
    }
}

/// Shared ingredients of the same-time contraction checks at one time.
struct ContractionPieces<T> {
    w0: T,
    wt: T,
    du: T,
    /// `Ent(P_u f) − Ent(P_u g)` at the Simpson nodes.
    dent: Vec<T>,
}

fn contraction_pieces<T: Real>(exp: &ContractionExperiment<'_, T>, w0: T, t: T) -> Result<ContractionPieces<T>> {
    let sp = exp.space;
    let ft = sp.evolve(&exp.f, t)?;
    let gt = sp.evolve(&exp.g, t)?;
    let wt = sp.w2(&ft, &gt)?;
    let ef = sp.entropy_path(&exp.f, t, exp.intervals)?;
    let eg = sp.entropy_path(&exp.g, t, exp.intervals)?;
    let dent = ef.iter().zip(&eg).map(|(a, b)| *a - *b).collect();
    Ok(ContractionPieces { w0, wt, du: exp.du(t), dent })
}

/// `∫₀ᵗ e^{−2R(t−u)} φ(ΔEnt(u)) du` by Simpson.
fn discounted_integral<T: Real>(p: &ContractionPieces<T>, r: T, t: T, phi: impl Fn(T) -> T) -> T {
    let vals: Vec<T> = p
        .dent
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let u = p.du * T::from_usize(k).unwrap();
            (T::c(-2.0) * r * (t - u)).exp() * phi(*d)
        })
        .collect();
    simpson(&vals, p.du)
}

/// `2m sinh²(x/(2m))`, with its `m = ∞` limit `0`.
fn sinh_term<T: Real>(m: T, x: T) -> T {
    if m.is_infinite() {
        return T::zero();
    }
    let s = (x / (m + m)).sinh();
    (m + m) * s * s
}

fn branch<T: Real>(r: T, x: T, what: &str) -> Result<T> {
    s_r(r, x).map_err(|e| match e {
        Error::OutOfBranch(v, _) => Error::OutOfBranch(v, what.to_string()),
        other => other,
    })
}

/// Subtracted integrals of the sinh-form and square-form contractions at time `t`:
/// `(2m∫e^{−2R(t−u)} sinh²(ΔEnt/2m), (2/m)∫e^{−2R(t−u)} ΔEnt²)`.
pub fn subtracted_integrals<T: Real>(exp: &ContractionExperiment<'_, T>, t: T) -> Result<(T, T)> {
    let w0 = exp.space.w2(&exp.f, &exp.g)?;
    let p = contraction_pieces(exp, w0, t)?;
    let r = exp.params.r;
    let m = exp.params.m;
    let sinh = discounted_integral(&p, r, t, |d| sinh_term(m, d));
    let sq = T::c(2.0) * exp.params.inv_m() * discounted_integral(&p, r, t, |d| d * d);
    Ok((sinh, sq))
}

/// `W₂²(P_tf, P_tg) ≤ e^{−2Rt}W₂²(f,g) − (2/m)∫₀ᵗ e^{−2R(t−u)}(Ent(P_uf) − Ent(P_ug))² du`.
pub fn check_contraction_iii<T: Real>(exp: &ContractionExperiment<'_, T>) -> Result<Vec<CheckReport>> {
    let w0 = exp.space.w2(&exp.f, &exp.g)?;
    let r = exp.params.r;
    let mut out = Vec::with_capacity(exp.times.len());
    for &t in &exp.times {
        let dx = exp.space.dx().f64();
        if t == T::zero() {
            let v = (w0 * w0).f64();
            out.push(CheckReport::new("contraction-square", anchor::CONTRACTION_SQUARE, v, v, exp.tol.eval(dx, 0.0)).at(0.0));
            continue;
        }
        let p = contraction_pieces(exp, w0, t)?;
        let integral = discounted_integral(&p, r, t, |d| d * d);
        let lhs = p.wt * p.wt;
        let rhs = (T::c(-2.0) * r * t).exp() * p.w0 * p.w0 - T::c(2.0) * exp.params.inv_m() * integral;
        out.push(
            CheckReport::new("contraction-square", anchor::CONTRACTION_SQUARE, lhs.f64(), rhs.f64(), exp.tol.eval(dx, p.du.f64()))
                .at(t.f64())
                .with("R", r)
                .with("m", exp.params.m)
                .with("n", exp.space.grid.n)
                .with("du", p.du),
        );
    }
    Ok(out)
}

fn contraction_ii_at<T: Real>(exp: &ContractionExperiment<'_, T>, w0: T, t: T) -> Result<CheckReport> {
    let r = exp.params.r;
    let m = exp.params.m;
    let rm = exp.params.r_over_m();
    let half = T::c(0.5);
    let dx = exp.space.dx().f64();
    let s0 = branch(rm, half * w0, "W(f, g)")?;
    if t == T::zero() {
        let v = (s0 * s0).f64();
        return Ok(CheckReport::new("contraction-sinh", anchor::CONTRACTION_SINH, v, v, exp.tol.eval(dx, 0.0)).at(0.0));
    }
    let p = contraction_pieces(exp, w0, t)?;
    let st = branch(rm, half * p.wt, "W(P_t f, P_t g)")?;
    let integral = discounted_integral(&p, r, t, |d| sinh_term(m, d));
    let lhs = st * st;
    let rhs = (T::c(-2.0) * r * t).exp() * s0 * s0 - integral;
    Ok(
        CheckReport::new("contraction-sinh", anchor::CONTRACTION_SINH, lhs.f64(), rhs.f64(), exp.tol.eval(dx, p.du.f64()))
            .at(t.f64())
            .with("R", r)
            .with("m", m)
            .with("n", exp.space.grid.n)
            .with("du", p.du),
    )
}

/// `s_{R/m}(½W₂(P_tf,P_tg))² ≤ e^{−2Rt}s_{R/m}(½W₂(f,g))² − 2m∫₀ᵗe^{−2R(t−u)}sinh²(ΔEnt/(2m))du`.
pub fn check_contraction_ii<T: Real>(exp: &ContractionExperiment<'_, T>) -> Result<Vec<CheckReport>> {
    let w0 = exp.space.w2(&exp.f, &exp.g)?;
    exp.times.iter().map(|&t| contraction_ii_at(exp, w0, t)).collect()
}

/// Two-time bound between `P_t f` and `P_s g`.
#[allow(clippy::too_many_arguments)]
pub fn check_two_time_eks<T: Real>(
    space: &Space<T>,
    f: &GridDensity<T>,
    g: &GridDensity<T>,
    s: T,
    t: T,
    params: CurvatureParams<T>,
    tol: Tolerance,
) -> Result<CheckReport> {
    if s < T::zero() || t < T::zero() || (s == T::zero() && t == T::zero()) {
        return Err(Error::Parameter(format!("two-time check needs s, t >= 0 not both 0, got s = {s}, t = {t}")));
    }
    let rm = params.r_over_m();
    let half = T::c(0.5);
    let w0 = space.w2(f, g)?;
    let wst = space.w2(&space.evolve(f, t)?, &space.evolve(g, s)?)?;
    let s0 = branch(rm, half * w0, "W(f, g)")?;
    let st = branch(rm, half * wst, "W(P_t f, P_s g)")?;
    let r = params.r;
    let gap = (t.sqrt() - s.sqrt()).powi(2);
    let extra = if gap == T::zero() {
        T::zero()
    } else {
        let coeff = if r.abs() < T::c(crate::functionals::S_R_ZERO) {
            params.m * (s + t)
        } else {
            params.m / r * (T::one() - (-r * (s + t)).exp())
        };
        coeff * gap / (T::c(2.0) * (t + s))
    };
    let lhs = st * st;
    let rhs = (-r * (t + s)).exp() * s0 * s0 + extra;
    Ok(CheckReport::new("two-time", anchor::TWO_TIME, lhs.f64(), rhs.f64(), tol.eval(space.dx().f64(), 0.0))
        .at(t.f64())
        .with("s", s)
        .with("R", r)
        .with("m", params.m))
}

/// Default EVI difference step for time `t`.
pub fn evi_step<T: Real>(t: T) -> T {
    let h = T::c(1e-4);
    if t > T::zero() {
        h.min(t / T::c(4.0))
    } else {
        h
    }
}

/// `d/dt s_{R/m}(½W₂(P_tf, g))² + R s_{R/m}(…)² ≤ (m/2)(1 − U_m(g)/U_m(P_tf))`, with `g`
/// the experiment's second density used as the fixed probe.
pub fn check_evi<T: Real>(exp: &ContractionExperiment<'_, T>) -> Result<Vec<CheckReport>> {
    let sp = exp.space;
    let rm = exp.params.r_over_m();
    let (r, m) = (exp.params.r, exp.params.m);
    let half = T::c(0.5);
    let eg = sp.entropy(&exp.g);
    let phi = |tau: T| -> Result<T> {
        let ft = sp.evolve(&exp.f, tau)?;
        let s = branch(rm, half * sp.w2(&ft, &exp.g)?, "W(P_t f, g)")?;
        Ok(s * s)
    };
    let mut out = Vec::with_capacity(exp.times.len());
    for &t in &exp.times {
        let h = exp.evi_step.unwrap_or_else(|| evi_step(t));
        let deriv = if t >= h {
            (phi(t + h)? - phi(t - h)?) / (h + h)
        } else {
            (phi(t + h)? - phi(t)?) / h
        };
        let ft = sp.evolve(&exp.f, t)?;
        let lhs = deriv + r * phi(t)?;
        let de = sp.entropy(&ft) - eg;
        let rhs = if m.is_infinite() { -half * de } else { half * m * (T::one() - (de / m).exp()) };
        let tol = exp.tol.c_dx * sp.dx().f64() + 10.0 * h.f64();
        out.push(
            CheckReport::new("evi", anchor::EVI, lhs.f64(), rhs.f64(), tol)
                .at(t.f64())
                .with("h", h)
                .with("R", r)
                .with("m", m)
                .with("n", sp.grid.n),
        );
    }
    Ok(out)
}

/// Geodesic subdivision chain at time `t` for each `n` in `n_refine`.
///
/// For `n = 1` the report is the sinh-form contraction report itself. For `n ≥ 2`
/// the interpolants `y_{i/n}` are built by displacement interpolation and the
/// report compares `W₂²(P_t f, P_t g)` with
/// `4n Σ_i [e^{−2Rt}s(½d_i)² − (1/2m)∫e^{−2R(t−u)}(ΔEnt_i)² du]`.
pub fn refinement_prop21<T: Real>(
    space: &Space<T>,
    f: &GridDensity<T>,
    g: &GridDensity<T>,
    t: T,
    params: CurvatureParams<T>,
    n_refine: &[usize],
    tol: Tolerance,
) -> Result<Vec<CheckReport>> {
    if !(t > T::zero()) {
        return Err(Error::Parameter(format!("refinement needs t > 0, got {t}")));
    }
    let base = ContractionExperiment::new(space, f.clone(), g.clone(), params, vec![t])?.with_tolerance(tol);
    let w0 = space.w2(f, g)?;
    let dx = space.dx().f64();
    let rm = params.r_over_m();
    let half = T::c(0.5);
    let decay = (T::c(-2.0) * params.r * t).exp();

    // bound_1: the square-form right-hand side on the original pair.
    let p1 = contraction_pieces(&base, w0, t)?;
    let bound1 = {
        let s0 = branch(rm, half * w0, "W(f, g)")?;
        let int = discounted_integral(&p1, params.r, t, |d| d * d);
        T::c(4.0) * (decay * s0 * s0 - half * params.inv_m() * int)
    };
    let wt2 = p1.wt * p1.wt;

    let mut out = Vec::new();
    for &n in n_refine {
        if !matches!(n, 1 | 2 | 4 | 8) {
            return Err(Error::Parameter(format!("refinement level {n} not in {{1, 2, 4, 8}}")));
        }
        if n == 1 {
            out.push(contraction_ii_at(&base, w0, t)?.with("refine", 1));
            continue;
        }
        let nt = T::from_usize(n).unwrap();
        let mut ys = Vec::with_capacity(n + 1);
        ys.push(f.clone());
        for i in 1..n {
            ys.push(w2_geodesic(&space.grid, f, g, T::from_usize(i).unwrap() / nt)?);
        }
        ys.push(g.clone());

        let seg_tol = tol.c_dx * dx;
        let mut sum_x = T::zero();
        let mut sum_x2 = T::zero();
        let mut bound = T::zero();
        let mut worst_seg = f64::INFINITY;
        let mut seg_ok = true;
        for i in 1..=n {
            let seg = ContractionExperiment::new(space, ys[i - 1].clone(), ys[i].clone(), params, vec![t])?;
            let di = space.w2(&ys[i - 1], &ys[i])?;
            let pi = contraction_pieces(&seg, di, t)?;
            let xi = pi.wt;
            sum_x += xi;
            sum_x2 += xi * xi;
            let sd = branch(rm, half * di, "W(y_(i-1)/n, y_i/n)")?;
            let sx = branch(rm, half * xi, "W(P_t y_(i-1)/n, P_t y_i/n)")?;
            let seg_rhs = decay * sd * sd - half * params.inv_m() * discounted_integral(&pi, params.r, t, |d| d * d);
            let margin = (seg_rhs - sx * sx).f64();
            worst_seg = worst_seg.min(margin);
            seg_ok &= margin >= -seg_tol;
            bound += seg_rhs;
        }
        let bound_n = T::c(4.0) * nt * bound;
        let chain1 = (sum_x * sum_x - wt2).f64();
        let chain2 = (nt * sum_x2 - sum_x * sum_x).f64();
        let final_tol = n as f64 * seg_tol;
        let tighten = (bound1 - bound_n).f64();
        let ok = seg_ok && chain1 >= -1e-10 && chain2 >= -1e-12 && tighten >= -final_tol;
        let report = CheckReport::new("geodesic-refinement", anchor::GEODESIC_REFINEMENT, wt2.f64(), bound_n.f64(), final_tol)
            .at(t.f64())
            .with("refine", n)
            .with("chain_triangle_slack", chain1)
            .with("chain_cauchy_schwarz_slack", chain2)
            .with("worst_segment_margin", worst_seg)
            .with("bound_1", bound1)
            .with("tightening_slack", tighten);
        let pass = report.pass && ok;
        out.push(report.with_verdict(pass));
    }
    Ok(out)
}

/// `L^g h = Lh + Γ(log g, h)` as a matrix: `L^g_ij = L_ij(1 + ½(log g_j − log g_i))` off the diagonal.
pub fn tilted_generator<T: Real>(gen: &GeneratorMatrix<T>, g: &[T]) -> Result<GeneratorMatrix<T>> {
    let n = gen.n();
    if g.len() != n {
        return Err(Error::Shape { expected: n, got: g.len() });
    }
    if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
        return Err(Error::Density(format!("tilting weight {v} <= 0 at node {i}")));
    }
    let lg: Vec<T> = g.iter().map(|v| v.ln()).collect();
    let half = T::c(0.5);
    let mut e = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let l = gen.get(i, j);
            if i != j && l != T::zero() {
                e[i * n + j] = l * (T::one() + half * (lg[j] - lg[i]));
            }
        }
    }
    Ok(GeneratorMatrix::from_entries(n, e))
}

/// `g_s = g(1 − s L^g f)`, renormalized when the discrete mass identity has a residual.
pub fn perturbed_density<T: Real>(
    grid: &WeightedGrid<T>,
    gen: &GeneratorMatrix<T>,
    g: &GridDensity<T>,
    f: &[T],
    s: T,
) -> Result<GridDensity<T>> {
    let tilted = tilted_generator(gen, g.values())?;
    let lgf = tilted.apply(f)?;
    perturb_with(grid, g, &lgf, s)
}

fn perturb_with<T: Real>(grid: &WeightedGrid<T>, g: &GridDensity<T>, lgf: &[T], s: T) -> Result<GridDensity<T>> {
    let big_n = lgf.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    if s < T::zero() || s * big_n >= T::one() {
        return Err(Error::Positivity { s: s.f64(), bound: (T::one() / big_n).f64() });
    }
    let values: Vec<T> = g.values().iter().zip(lgf).map(|(gi, l)| *gi * (T::one() - s * *l)).collect();
    let mass = grid.integrate(&values)?;
    if (mass - T::one()).abs() > T::c(1e-12) {
        return GridDensity::normalized(grid, values);
    }
    GridDensity::new(grid, values)
}

/// Options of the converse estimates.
#[derive(Debug, Clone)]
pub struct ConverseOptions<T> {
    pub s_list: Vec<T>,
    pub u_list: Vec<T>,
    /// Absolute tolerance (`10·dx` by default).
    pub tol: f64,
    /// Relative band for the equality-type estimates.
    pub ratio_band: f64,
}

impl<T: Real> ConverseOptions<T> {
    pub fn new(dx: T) -> Self {
        Self {
            s_list: vec![T::c(0.02), T::c(0.01), T::c(0.005)],
            u_list: vec![T::c(0.1), T::c(0.3)],
            tol: 10.0 * dx.f64(),
            ratio_band: 0.15,
        }
    }
}

/// Extrapolated `s → 0` value and whether successive extrapolants agree.
fn extrapolate<T: Real>(s: &[T], v: &[T], tol: f64) -> (T, bool, f64) {
    let full = extrapolate_to_zero(s, v);
    let partial = extrapolate_to_zero(&s[..s.len() - 1], &v[..v.len() - 1]);
    let spread = (full - partial).abs().f64();
    (full, spread <= 10.0 * tol, spread)
}

/// The three `s → 0` estimates of the converse argument, in order:
/// transport lower bound at time `t`, transport upper bound at time 0, entropy derivative.
pub fn converse_estimates<T: Real>(
    space: &Space<T>,
    g: &GridDensity<T>,
    f: &[T],
    t: T,
    opts: &ConverseOptions<T>,
) -> Result<[CheckReport; 3]> {
    if opts.s_list.len() < 2 || opts.s_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("s_list must be decreasing with at least two entries".into()));
    }
    let grid = &space.grid;
    let gen = &space.gen;
    let tilted = tilted_generator(gen, g.values())?;
    let lgf = tilted.apply(f)?;
    let half = T::c(0.5);
    // undefined (NaN) when the closed form vanishes to roundoff
    let ratio = |a: f64, b: f64| if b.abs() > 1e-9 { a / b } else { f64::NAN };

    let gs: Vec<GridDensity<T>> = opts.s_list.iter().map(|&s| perturb_with(grid, g, &lgf, s)).collect::<Result<_>>()?;
    let pg = space.evolve(g, t)?;

    // (a)
    let va: Vec<T> = opts
        .s_list
        .iter()
        .zip(&gs)
        .map(|(&s, gsd)| {
            let w = space.w2(&space.evolve(gsd, t)?, &pg)?;
            Ok(w * w / (T::c(2.0) * s * s))
        })
        .collect::<Result<_>>()?;
    let (lim_a, conv_a, spread_a) = extrapolate(&opts.s_list, &va, opts.tol);
    let gf = gen.gamma_sq(f)?;
    let ptf = space.spec.evolve(f, t)?;
    let pt_gf = space.spec.evolve(&gf, t)?;
    let cross = gen.gamma(f, &ptf)?;
    let rhs_a = -half * grid.integrate_product(&pt_gf, g.values())? + grid.integrate_product(&cross, g.values())?;
    let mut ra = CheckReport::new("converse-transport-lower", anchor::CONVERSE_LOWER, rhs_a.f64(), lim_a.f64(), opts.tol)
        .at(t.f64())
        .with("ratio", ratio(lim_a.f64(), rhs_a.f64()))
        .with("spread", spread_a);
    if !conv_a {
        ra = ra.inconclusive("extrapolation not converged");
    }

    // (b)
    let vb: Vec<T> = opts
        .s_list
        .iter()
        .zip(&gs)
        .map(|(&s, gsd)| {
            let w = space.w2(gsd, g)?;
            Ok(w * w / (T::c(2.0) * s * s))
        })
        .collect::<Result<_>>()?;
    let (lim_b, conv_b, spread_b) = extrapolate(&opts.s_list, &vb, opts.tol);
    let rhs_b = half * grid.integrate_product(&gf, g.values())?;
    let rat_b = ratio(lim_b.f64(), rhs_b.f64());
    let mut rb = CheckReport::new("converse-transport-upper", anchor::CONVERSE_UPPER, lim_b.f64(), rhs_b.f64(), opts.tol)
        .with("ratio", rat_b)
        .with("spread", spread_b);
    let pass_b = rb.pass && ((rat_b - 1.0).abs() <= opts.ratio_band || (rat_b.is_nan() && rb.lhs.abs() <= opts.tol));
    rb = rb.with_verdict(pass_b);
    if !conv_b {
        rb = rb.inconclusive("extrapolation not converged");
    }

    // (c), worst absolute deviation over the sampled u
    let mut worst: Option<(T, T, T, f64, bool)> = None;
    for &u in &opts.u_list {
        let pug = space.evolve(g, u)?;
        let e0 = space.entropy(&pug);
        let vc: Vec<T> = opts
            .s_list
            .iter()
            .zip(&gs)
            .map(|(&s, gsd)| Ok((space.entropy(&space.evolve(gsd, u)?) - e0) / s))
            .collect::<Result<_>>()?;
        let (lim_c, conv_c, spread_c) = extrapolate(&opts.s_list, &vc, opts.tol);
        let log_pug: Vec<T> = pug.values().iter().map(|v| v.max(T::min_positive_value()).ln()).collect();
        let pu_log = space.spec.evolve(&log_pug, u)?;
        let gam = gen.gamma(&pu_log, f)?;
        let rhs_c = grid.integrate_product(&gam, g.values())?;
        if worst.is_none_or(|w| (lim_c - rhs_c).abs() > (w.1 - w.2).abs()) {
            worst = Some((u, lim_c, rhs_c, spread_c, conv_c));
        }
    }
    let (u_c, lim_c, rhs_c, spread_c, conv_c) = worst.ok_or(Error::Parameter("empty u_list".into()))?;
    let rat_c = ratio(lim_c.f64(), rhs_c.f64());
    let mut rc = CheckReport::new("converse-entropy-derivative", anchor::CONVERSE_ENTROPY, lim_c.f64(), rhs_c.f64(), opts.tol)
        .at(u_c.f64())
        .with("ratio", rat_c)
        .with("spread", spread_c);
    let pass_c = rc.margin.abs() <= opts.tol || (rat_c - 1.0).abs() <= opts.ratio_band;
    rc = rc.with_verdict(pass_c);
    if !conv_c {
        rc = rc.inconclusive("extrapolation not converged");
    }
    Ok([ra, rb, rc])
}

/// Density profiles addressable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityPreset {
    Uniform,
    /// `1 + amp·sin(k·ω·x + phase)`, `ω = 2π/length`.
    Sin { k: f64, amp: f64, phase: f64 },
    /// `1 + amp·cos(k·ω·x + phase)`.
    Cos { k: f64, amp: f64, phase: f64 },
    /// `exp(κ cos(ω(x − center)))` (circle bump).
    VonMises { center: f64, kappa: f64 },
    /// `exp(−(x − center)²/(2σ²))`, periodized on the circle.
    Gaussian { center: f64, sigma: f64 },
    /// `1 + slope·x`.
    Linear { slope: f64 },
    /// All mass on one node.
    Dirac { node: usize },
}

impl DensityPreset {
    /// Unnormalized nodal profile.
    pub fn profile<T: Real>(&self, grid: &WeightedGrid<T>) -> Result<Vec<T>> {
        let omega = std::f64::consts::TAU / grid.length().f64();
        let len = grid.length().f64();
        let prof = |h: &dyn Fn(f64) -> f64| -> Vec<T> { grid.nodes.iter().map(|x| T::c(h(x.f64()))).collect() };
        Ok(match *self {
            DensityPreset::Uniform => prof(&|_| 1.0),
            DensityPreset::Sin { k, amp, phase } => prof(&|x| 1.0 + amp * (k * omega * x + phase).sin()),
            DensityPreset::Cos { k, amp, phase } => prof(&|x| 1.0 + amp * (k * omega * x + phase).cos()),
            DensityPreset::VonMises { center, kappa } => {
                prof(&|x| (kappa * ((omega * (x - center)).cos() - 1.0)).exp())
            }
            DensityPreset::Gaussian { center, sigma } => prof(&|x| match grid.kind {
                GridKind::Interval => (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp(),
                GridKind::Circle => (-2..=2)
                    .map(|k| {
                        let y = x - center + k as f64 * len;
                        (-(y * y) / (2.0 * sigma * sigma)).exp()
                    })
                    .sum(),
            }),
            DensityPreset::Linear { slope } => prof(&|x| 1.0 + slope * x),
            DensityPreset::Dirac { node } => {
                if node >= grid.n {
                    return Err(Error::Parameter(format!("dirac node {node} >= n = {}", grid.n)));
                }
                return Ok(GridDensity::dirac(grid, node)?.into_values());
            }
        })
    }

    /// The profile normalized to a probability density.
    pub fn build<T: Real>(&self, grid: &WeightedGrid<T>) -> Result<GridDensity<T>> {
        GridDensity::normalized(grid, self.profile(grid)?)
    }
}

/// The six-density reference family of a space.
pub fn reference_family<T: Real>(grid: &WeightedGrid<T>) -> Result<Vec<GridDensity<T>>> {
    use std::f64::consts::PI;
    let presets = match grid.kind {
        GridKind::Circle => vec![
            DensityPreset::Sin { k: 1.0, amp: 0.5, phase: 0.0 },
            DensityPreset::Cos { k: 1.0, amp: 0.5, phase: 0.0 },
            DensityPreset::Uniform,
            DensityPreset::VonMises { center: PI / 2.0, kappa: 4.0 },
            DensityPreset::VonMises { center: 3.0 * PI / 2.0, kappa: 8.0 },
            DensityPreset::Cos { k: 2.0, amp: 0.9, phase: 0.0 },
        ],
        GridKind::Interval => vec![
            DensityPreset::Uniform,
            DensityPreset::Cos { k: 1.0, amp: 0.5, phase: 0.0 },
            DensityPreset::Gaussian { center: 0.25, sigma: 0.05 },
            DensityPreset::Gaussian { center: -0.25, sigma: 0.08 },
            DensityPreset::Linear { slope: 1.0 },
            DensityPreset::Gaussian { center: 0.45, sigma: 0.03 },
        ],
    };
    presets.iter().map(|p| p.build(grid)).collect()
}

/// Narrow translated bump pairs for the falsification direction: at small times
/// the EVI margin of such a pair is close to `¼W²(K − R)` with `K` the contraction
/// rate of the drift, so a strengthened `R` shows up as a negative margin.
pub fn falsification_probes<T: Real>(grid: &WeightedGrid<T>) -> Result<Vec<(GridDensity<T>, GridDensity<T>)>> {
    let pairs = match grid.kind {
        GridKind::Circle => {
            // integer-cell shift keeps the pair an exact lattice translate; a separation
            // of 0.4 of the period keeps the tails clear of the cut locus
            let len = grid.length().f64();
            let dx = grid.dx.f64();
            let c = grid.nodes[grid.n / 10].f64();
            let shift = (0.4 * grid.n as f64).round() * dx;
            let sigma = 0.05 * len / std::f64::consts::TAU;
            vec![(
                DensityPreset::Gaussian { center: c, sigma },
                DensityPreset::Gaussian { center: c + shift, sigma },
            )]
        }
        GridKind::Interval => {
            let mid = 0.5 * (grid.a + grid.b).f64();
            let len = grid.length().f64();
            vec![(
                DensityPreset::Gaussian { center: mid + 0.4 * len, sigma: 0.025 * len },
                DensityPreset::Gaussian { center: mid - 0.4 * len, sigma: 0.025 * len },
            )]
        }
    };
    pairs.into_iter().map(|(a, b)| Ok((a.build(grid)?, b.build(grid)?))).collect()
}

/// Small times at which the falsification probes are evaluated.
pub const PROBE_TIMES: [f64; 2] = [1e-6, 1e-5];

/// Runs every contraction-type check on all ordered pairs of a family at the given times.
pub fn contraction_suite<T: Real>(
    space: &Space<T>,
    params: CurvatureParams<T>,
    family: &[GridDensity<T>],
    times: &[T],
    tol: Tolerance,
) -> Result<Vec<CheckReport>> {
    use rayon::prelude::*;
    let mut pairs = Vec::new();
    for i in 0..family.len() {
        for j in 0..family.len() {
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    let chunks: Vec<Vec<CheckReport>> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<Vec<CheckReport>> {
            let exp = ContractionExperiment::new(space, family[i].clone(), family[j].clone(), params, times.to_vec())?
                .with_tolerance(tol);
            let tag = |r: CheckReport| r.with("pair", format!("{i}-{j}"));
            let mut out: Vec<CheckReport> = Vec::new();
            if i < j {
                out.extend(check_contraction_ii(&exp)?.into_iter().map(tag));
                out.extend(check_contraction_iii(&exp)?.into_iter().map(tag));
                for w in times.windows(2) {
                    out.push(tag(check_two_time_eks(space, &family[i], &family[j], w[0], w[1], params, tol)?));
                }
            }
            out.extend(check_evi(&exp)?.into_iter().map(tag));
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Outcome of one strengthened-parameter run.
#[derive(Debug, Clone)]
pub struct FalsificationRun {
    pub label: String,
    pub params: (f64, f64),
    pub pointwise: CheckReport,
    pub contraction_failures: usize,
    pub worst_contraction: Option<CheckReport>,
}

impl FalsificationRun {
    pub fn detected(&self) -> bool {
        !self.pointwise.pass && self.contraction_failures > 0
    }
}

#[derive(Debug, Clone)]
pub struct EquivalenceOutcome {
    pub r_star: f64,
    pub forward: Vec<CheckReport>,
    pub falsification: Vec<FalsificationRun>,
    pub aggregate: CheckReport,
}

/// Strengthening amounts: `R + delta_scale·|R*| + delta_shift` and `m / kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Falsification {
    pub delta_scale: f64,
    pub delta_shift: f64,
    pub kappa: f64,
}

impl Default for Falsification {
    fn default() -> Self {
        Self { delta_scale: 0.5, delta_shift: 0.1, kappa: 10.0 }
    }
}

/// Forward checks on a family plus the strengthened-parameter falsification runs.
pub fn equivalence_report<T: Real>(
    space: &Space<T>,
    params: CurvatureParams<T>,
    family: &[GridDensity<T>],
    times: &[T],
    tol: Tolerance,
    fals: Falsification,
) -> Result<EquivalenceOutcome> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let grid = &space.grid;
    let dx = grid.dx.f64();
    let cd_tol = T::c(tol.c_dx * dx);
    let test_fns = default_family(grid, params.m);
    let mut forward = vec![check_pointwise_cd(&space.gen, grid, params, &test_fns, cd_tol)?];
    forward.extend(contraction_suite(space, params, family, times, tol)?);

    let r_star = estimate_best_r(&space.gen, grid, params.m, &test_fns)?;
    let delta = T::c(fals.delta_scale) * r_star.abs() + T::c(fals.delta_shift);
    let strengthened = [
        ("R+delta", CurvatureParams::new(params.r + delta, params.m)?),
        ("m/kappa", CurvatureParams::new(params.r, params.m / T::c(fals.kappa))?),
    ];
    let probes = falsification_probes(grid)?;
    let probe_times: Vec<T> = PROBE_TIMES.iter().map(|t| T::c(*t)).collect();
    let mut falsification = Vec::new();
    for (label, p) in strengthened {
        let strong_fns = default_family(grid, p.m);
        let pointwise = check_pointwise_cd(&space.gen, grid, p, &strong_fns, cd_tol)?;
        let mut reports = contraction_suite(space, p, family, times, tol)?;
        for (a, b) in &probes {
            reports.extend(contraction_suite(space, p, &[a.clone(), b.clone()], &probe_times, tol)?);
        }
        let failures = reports.iter().filter(|r| !r.pass).count();
        let worst = reports.iter().min_by(|a, b| (a.margin + a.tol).total_cmp(&(b.margin + b.tol))).cloned();
        falsification.push(FalsificationRun {
            label: label.to_string(),
            params: (p.r.f64(), p.m.f64()),
            pointwise,
            contraction_failures: failures,
            worst_contraction: worst,
        });
    }
    let forward_ok = forward.iter().all(|r| r.pass);
    let fals_ok = falsification.iter().all(|f| f.detected());
    let worst = forward.iter().min_by(|a, b| (a.margin + a.tol).total_cmp(&(b.margin + b.tol))).unwrap();
    let aggregate = CheckReport::new("equivalence", anchor::CD_POINTWISE, worst.lhs, worst.rhs, worst.tol)
        .with("forward_checks", forward.len())
        .with("falsification_detected", falsification.iter().filter(|f| f.detected()).count())
        .with("r_star", r_star)
        .with_verdict(forward_ok && fals_ok);
    Ok(EquivalenceOutcome { r_star: r_star.f64(), forward, falsification, aggregate })
}
