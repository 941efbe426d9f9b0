//! Randomized batteries: discrete identities, the transport oracle and mesh convergence.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{build_grid, default_family, estimate_best_r, GridDensity, GridKind, Potential, WeightedGrid};
use crate::harness::Space;
use crate::report::{anchor, CheckReport};
use crate::scalar::Real;
use crate::transport::{hj_residual, hopf_lax, kantorovich_lower_bound, lipschitz, w2, w2_lp, MassModel};

/// Random trigonometric polynomial with `modes` frequencies and unit-range coefficients
/// (cosines only on an interval, so the profile satisfies the reflecting condition).
pub fn random_smooth<T: Real, R: Rng>(grid: &WeightedGrid<T>, modes: usize, rng: &mut R) -> Vec<T> {
    let len = grid.length().f64();
    let a = grid.a.f64();
    let omega = match grid.kind {
        GridKind::Circle => std::f64::consts::TAU / len,
        GridKind::Interval => std::f64::consts::PI / len,
    };
    let coeffs: Vec<(f64, f64)> = (0..modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    grid.nodes
        .iter()
        .map(|x| {
            let y = x.f64() - a;
            let v: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, (c, s))| {
                    let kk = (k + 1) as f64 * omega;
                    match grid.kind {
                        GridKind::Circle => c * (kk * y).cos() + s * (kk * y).sin(),
                        GridKind::Interval => c * (kk * y).cos(),
                    }
                })
                .sum();
            T::c(v)
        })
        .collect()
}

/// Random smooth positive density `∝ 1 + ½h/‖h‖_∞`.
pub fn random_density<T: Real, R: Rng>(grid: &WeightedGrid<T>, modes: usize, rng: &mut R) -> Result<GridDensity<T>> {
    let h = random_smooth(grid, modes, rng);
    let sup = h.iter().fold(T::zero(), |a, v| a.max(v.abs())).max(T::c(1e-300));
    GridDensity::normalized(grid, h.into_iter().map(|v| T::one() + T::c(0.5) * v / sup).collect())
}

fn sup<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, x| a.max(x.abs()))
}

/// Worst normalized residuals of the exact discrete identities over `count` random
/// `(f, g, s, t)` instances: integration by parts, conservativity, `μ`-symmetry,
/// `Γ ≥ 0`, the semigroup law and mass conservation.
pub fn identity_suite<T: Real, R: Rng>(space: &Space<T>, count: usize, rng: &mut R) -> Result<Vec<CheckReport>> {
    let grid = &space.grid;
    let gen = &space.gen;
    let n = grid.n;
    let row_scale = (0..n)
        .map(|i| (0..n).map(|j| gen.get(i, j).abs()).fold(T::zero(), |a, b| a + b))
        .fold(T::zero(), T::max);
    let mut worst = [T::zero(); 6];
    for _ in 0..count {
        let f = random_smooth(grid, 4, rng);
        let g = random_smooth(grid, 4, rng);
        let rho = random_density(grid, 3, rng)?;
        let s = T::c(rng.gen_range(0.001..0.5));
        let t = T::c(rng.gen_range(0.001..0.5));
        let scale = row_scale * sup(&f) * sup(&g) * grid.total_mass();
        let lf = gen.apply(&f)?;
        let lg = gen.apply(&g)?;
        let gam = gen.gamma(&f, &g)?;
        let ibp = grid.integrate_product(&f, &lg)? + grid.integrate(&gam)?;
        let cons = grid.integrate(&lf)?;
        let sym = grid.integrate_product(&f, &lg)? - grid.integrate_product(&g, &lf)?;
        let gmin = gen.gamma_sq(&f)?.into_iter().fold(T::zero(), T::min);
        let pst = space.spec.evolve(&f, s + t)?;
        let ps_pt = space.spec.evolve(&space.spec.evolve(&f, t)?, s)?;
        let law = pst.iter().zip(&ps_pt).fold(T::zero(), |a, (x, y)| a.max((*x - *y).abs())) / sup(&f);
        let mass = (grid.integrate(&space.spec.evolve(rho.values(), t)?)? - grid.integrate(rho.values())?).abs();
        let fscale = row_scale * sup(&f) * sup(&f);
        let vals = [
            ibp.abs() / scale,
            cons.abs() / (row_scale * sup(&f) * grid.total_mass()),
            sym.abs() / scale,
            -gmin / fscale,
            law,
            mass,
        ];
        for (w, v) in worst.iter_mut().zip(vals) {
            *w = w.max(v);
        }
    }
    let names = [
        ("integration-by-parts", 1e-11),
        ("conservativity", 1e-11),
        ("mu-symmetry", 1e-11),
        ("gamma-nonnegative", 1e-11),
        ("semigroup-law", 1e-9),
        ("mass-conservation", 1e-10),
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|((name, tol), w)| {
            CheckReport::new(*name, anchor::IDENTITY, w.f64(), 0.0, *tol).with("instances", count).with("n", n)
        })
        .collect())
}

/// Random density with independent node values in `[0.05, 1]`, occasionally sparse.
fn rough_density<R: Rng>(grid: &WeightedGrid<f64>, rng: &mut R) -> Result<GridDensity<f64>> {
    let sparse = rng.gen_bool(0.25);
    let values = (0..grid.n)
        .map(|_| if sparse && rng.gen_bool(0.6) { 0.0 } else { rng.gen_range(0.05..1.0) })
        .collect();
    GridDensity::normalized(grid, values)
}

/// Exact distances against the linear-programming oracle on `count` random pairs,
/// plus the triangle inequality, plan marginals and Kantorovich dual feasibility.
pub fn w2_oracle_suite<R: Rng>(grid: &WeightedGrid<f64>, count: usize, rng: &mut R) -> Result<Vec<CheckReport>> {
    let mut lp_gap = 0.0f64;
    let mut triangle = 0.0f64;
    let mut marginals = 0.0f64;
    let mut dual = f64::NEG_INFINITY;
    let mut prev: Option<GridDensity<f64>> = None;
    for _ in 0..count {
        let f = rough_density(grid, rng)?;
        let g = rough_density(grid, rng)?;
        let exact = w2(grid, &f, &g, MassModel::Atomic)?;
        let lp = w2_lp(grid, &f, &g)?;
        lp_gap = lp_gap.max((exact - lp.distance).abs());
        if let Some(plan) = &lp.plan {
            marginals = marginals.max(plan.row_residual).max(plan.col_residual);
        }
        if let Some(h) = &prev {
            let fh = w2(grid, &f, h, MassModel::Atomic)?;
            let hg = w2(grid, h, &g, MassModel::Atomic)?;
            triangle = triangle.max(exact - fh - hg);
        }
        let psi: Vec<f64> = (0..grid.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = rng.gen_range(0.1..2.0);
        let bound = kantorovich_lower_bound(grid, &f, &g, &psi, s)?;
        dual = dual.max(bound - exact * exact / (2.0 * s * s));
        prev = Some(g);
    }
    Ok(vec![
        CheckReport::new("w2-lp-agreement", anchor::W2_ORACLE, lp_gap, 0.0, 1e-5).with("pairs", count).with("n", grid.n),
        CheckReport::new("w2-triangle", anchor::W2_ORACLE, triangle, 0.0, 1e-9).with("pairs", count),
        CheckReport::new("w2-plan-marginals", anchor::W2_ORACLE, marginals, 0.0, 1e-9).with("pairs", count),
        CheckReport::new("kantorovich-dual-feasibility", anchor::KANTOROVICH, dual, 0.0, 1e-9).with("pairs", count),
    ])
}

/// Nodes where `Q` has a concave kink: the backward slope exceeds the forward slope by
/// more than `threshold`.
pub fn concave_kinks<T: Real>(grid: &WeightedGrid<T>, q: &[T], threshold: T) -> Vec<bool> {
    let n = grid.n;
    (0..n)
        .map(|i| {
            let periodic = grid.kind == GridKind::Circle;
            if !periodic && (i == 0 || i == n - 1) {
                return false;
            }
            let b = (q[i] - q[(i + n - 1) % n]) / grid.dx;
            let f = (q[(i + 1) % n] - q[i]) / grid.dx;
            b - f > threshold
        })
        .collect()
}

/// Largest Hamilton–Jacobi residual of `Q_sψ` for a smooth `ψ`, against `tol = c·dx·(1 + Lip(ψ)²)`.
///
/// The equation holds almost everywhere: nodes next to a concave kink of `Q_sψ` (slope jump
/// above `√dx·(1 + Lip)`) are excluded and counted in the `kinks` metadata.
pub fn hamilton_jacobi_check<T: Real>(grid: &WeightedGrid<T>, psi: &[T], s: T, c: f64) -> Result<CheckReport> {
    let ds = s * T::c(1e-3);
    let res = hj_residual(grid, psi, s, ds)?;
    let lip = lipschitz(grid, psi).f64();
    let q = hopf_lax(grid, psi, s)?;
    let kinks = concave_kinks(grid, &q, T::c(grid.dx.f64().sqrt() * (1.0 + lip)));
    let worst = res.iter().zip(&kinks).filter(|(_, k)| !**k).fold(0.0f64, |a, (r, _)| a.max(r.f64()));
    Ok(CheckReport::new("hamilton-jacobi", anchor::HAMILTON_JACOBI, worst, 0.0, c * grid.dx.f64() * (1.0 + lip * lip))
        .at(s.f64())
        .with("lipschitz", lip)
        .with("kinks", kinks.iter().filter(|k| **k).count()))
}

/// `estimate_best_r` on the reference space of the given kind at each `n`, the errors
/// against `target` and the observed orders `log₂(e_n / e_{2n})`. Passes when every
/// observed order is at least `min_order`.
pub fn mesh_convergence(
    kind: GridKind,
    domain: (f64, f64),
    potential: &Potential<f64>,
    m: f64,
    ns: &[usize],
    target: f64,
    min_order: f64,
) -> Result<CheckReport> {
    if ns.len() < 2 {
        return Err(Error::Parameter("mesh convergence needs at least two grid sizes".into()));
    }
    let mut rs = Vec::with_capacity(ns.len());
    for &n in ns {
        let grid = build_grid(kind, n, domain, potential, true)?;
        let gen = crate::grid::build_generator(&grid)?;
        rs.push(estimate_best_r(&gen, &grid, m, &default_family(&grid, m))?);
    }
    let errs: Vec<f64> = rs.iter().map(|r| (r - target).abs()).collect();
    let orders: Vec<f64> = errs
        .windows(2)
        .zip(ns.windows(2))
        .map(|(e, n)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect();
    let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CheckReport::new("mesh-convergence", anchor::CD_POINTWISE, min_order, worst, 0.0)
        .with("target", target)
        .with("r_star", format!("{rs:?}"))
        .with("orders", format!("{orders:?}")))
}
