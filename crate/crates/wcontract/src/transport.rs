//! Exact quadratic Wasserstein distances on 1-D grids, displacement interpolation,
//! the Hopf–Lax semigroup and Kantorovich dual bounds.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{GridDensity, GridKind, WeightedGrid};
use crate::scalar::Real;

/// How node masses are placed in space when measuring transport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassModel {
    /// Point mass `f_i w_i` at `x_i` (what the LP oracle sees).
    Atomic,
    /// Mass `f_i w_i` spread uniformly over the cell `[x_i − dx/2, x_i + dx/2]`.
    #[default]
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W2Method {
    Quantile,
    CircleOffset,
    Lp,
}

/// Coupling between two densities, masses in row-major `n × n` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    pub n: usize,
    pub coupling: Vec<T>,
    pub row_residual: T,
    pub col_residual: T,
}

impl<T: Real> TransportPlan<T> {
    pub fn total_mass(&self) -> T {
        self.coupling.iter().copied().sum()
    }

    /// Writes `(i, j, mass)` triples for nonzero entries.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,j,mass")?;
        for i in 0..self.n {
            for j in 0..self.n {
                let m = self.coupling[i * self.n + j];
                if m > T::zero() {
                    writeln!(out, "{i},{j},{:e}", m.f64())?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct W2Result<T> {
    pub distance: T,
    pub method: W2Method,
    pub plan: Option<TransportPlan<T>>,
    /// Optimal quantile offset on the circle.
    pub offset: Option<T>,
}

/// Piece of a quantile function, linear on `[u0, u1]`.
#[derive(Debug, Clone, Copy)]
struct Seg<T> {
    u0: T,
    u1: T,
    x0: T,
    x1: T,
}

impl<T: Real> Seg<T> {
    #[inline]
    fn at(&self, u: T) -> T {
        let len = self.u1 - self.u0;
        if len > T::zero() {
            self.x0 + (self.x1 - self.x0) * ((u - self.u0) / len)
        } else {
            self.x0
        }
    }
}

fn quantile_segments<T: Real>(grid: &WeightedGrid<T>, masses: &[T], model: MassModel) -> Vec<Seg<T>> {
    let total: T = masses.iter().copied().sum();
    let half = grid.dx * T::c(0.5);
    let mut segs = Vec::with_capacity(grid.n);
    let mut u = T::zero();
    for (i, m) in masses.iter().enumerate() {
        if *m <= T::zero() {
            continue;
        }
        let u1 = u + *m / total;
        let x = grid.nodes[i];
        let (x0, x1) = match model {
            MassModel::Atomic => (x, x),
            MassModel::Cell => (x - half, x + half),
        };
        segs.push(Seg { u0: u, u1, x0, x1 });
        u = u1;
    }
    if let Some(last) = segs.last_mut() {
        last.u1 = T::one();
    }
    segs
}

/// `∫₀¹ |A(u) − B(u)|² du` for two piecewise-linear quantile functions.
fn merged_cost<T: Real>(a: &[Seg<T>], b: &[Seg<T>]) -> T {
    let third = T::one() / T::c(3.0);
    let (mut i, mut j) = (0, 0);
    let mut u = T::zero();
    let mut acc = T::zero();
    while i < a.len() && j < b.len() {
        let hi = a[i].u1.min(b[j].u1);
        if hi > u {
            let d0 = a[i].at(u) - b[j].at(u);
            let d1 = a[i].at(hi) - b[j].at(hi);
            acc += (d0 * d0 + d0 * d1 + d1 * d1) * third * (hi - u);
            u = hi;
        }
        let (ea, eb) = (a[i].u1 <= hi, b[j].u1 <= hi);
        if ea {
            i += 1;
        }
        if eb {
            j += 1;
        }
    }
    acc
}

/// Quantile function `u ↦ G⁻¹(u + θ)` on `[0, 1]` using the periodic extension
/// `G⁻¹(v + 1) = G⁻¹(v) + P`.
fn shifted<T: Real>(b: &[Seg<T>], theta: T, period: T) -> Vec<Seg<T>> {
    let k0 = theta.floor();
    let mut out = Vec::with_capacity(2 * b.len());
    for dk in 0..2 {
        let k = k0 + T::from_i32(dk).unwrap();
        for s in b {
            let lo = s.u0 + k - theta;
            let hi = s.u1 + k - theta;
            if hi <= T::zero() || lo >= T::one() {
                continue;
            }
            let moved = Seg { u0: lo, u1: hi, x0: s.x0 + k * period, x1: s.x1 + k * period };
            let (c0, c1) = (lo.max(T::zero()), hi.min(T::one()));
            if c1 > c0 {
                out.push(Seg { u0: c0, u1: c1, x0: moved.at(c0), x1: moved.at(c1) });
            }
        }
    }
    out
}

fn check_pair<T: Real>(grid: &WeightedGrid<T>, f: &GridDensity<T>, g: &GridDensity<T>) -> Result<()> {
    grid.check_len(f.values())?;
    grid.check_len(g.values())
}

/// Monotone-rearrangement distance on an interval grid.
pub fn w2_quantile<T: Real>(
    grid: &WeightedGrid<T>,
    f: &GridDensity<T>,
    g: &GridDensity<T>,
    model: MassModel,
) -> Result<W2Result<T>> {
    if grid.kind != GridKind::Interval {
        return Err(Error::WrongMethod("w2_quantile", "interval"));
    }
    check_pair(grid, f, g)?;
    let a = quantile_segments(grid, &f.masses(grid), model);
    let b = quantile_segments(grid, &g.masses(grid), model);
    let c = merged_cost(&a, &b).max(T::zero());
    Ok(W2Result { distance: c.sqrt(), method: W2Method::Quantile, plan: None, offset: None })
}

/// Number of coarse offsets scanned before golden-section refinement.
pub const CIRCLE_SCAN: usize = 64;

fn circle_cost<T: Real>(a: &[Seg<T>], b: &[Seg<T>], theta: T, period: T) -> T {
    merged_cost(a, &shifted(b, theta, period))
}

fn minimize_offset<T: Real>(a: &[Seg<T>], b: &[Seg<T>], period: T) -> (T, T) {
    let steps = CIRCLE_SCAN;
    let h = T::c(2.0) / T::from_usize(steps).unwrap();
    let cost = |th: T| circle_cost(a, b, th, period);
    let mut best = (T::infinity(), 0usize);
    for k in 0..=steps {
        let th = -T::one() + h * T::from_usize(k).unwrap();
        let c = cost(th);
        if c < best.0 {
            best = (c, k);
        }
    }
    let center = -T::one() + h * T::from_usize(best.1).unwrap();
    let (mut lo, mut hi) = (center - h, center + h);
    let phi = (T::c(5.0).sqrt() - T::one()) * T::c(0.5);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    let eps = T::epsilon() * T::c(4.0);
    for _ in 0..200 {
        if hi - lo <= eps {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = cost(x2);
        }
    }
    let mut out = if f1 <= f2 { (f1, x1) } else { (f2, x2) };
    if best.0 < out.0 {
        out = (best.0, center);
    }
    out
}

/// Distance on a circle grid by minimizing over the quantile offset.
pub fn w2_circle<T: Real>(
    grid: &WeightedGrid<T>,
    f: &GridDensity<T>,
    g: &GridDensity<T>,
    model: MassModel,
) -> Result<W2Result<T>> {
    if grid.kind != GridKind::Circle {
        return Err(Error::WrongMethod("w2_circle", "circle"));
    }
    check_pair(grid, f, g)?;
    let a = quantile_segments(grid, &f.masses(grid), model);
    let b = quantile_segments(grid, &g.masses(grid), model);
    let (c, theta) = minimize_offset(&a, &b, grid.length());
    Ok(W2Result { distance: c.max(T::zero()).sqrt(), method: W2Method::CircleOffset, plan: None, offset: Some(theta) })
}

/// Exact 1-D distance, dispatching on the grid kind.
pub fn w2<T: Real>(grid: &WeightedGrid<T>, f: &GridDensity<T>, g: &GridDensity<T>, model: MassModel) -> Result<T> {
    Ok(match grid.kind {
        GridKind::Interval => w2_quantile(grid, f, g, model)?,
        GridKind::Circle => w2_circle(grid, f, g, model)?,
    }
    .distance)
}

/// Largest grid handled by the LP oracle.
pub const LP_MAX_N: usize = 128;

/// Optimal coupling of the atomic measures by linear programming.
pub fn w2_lp(grid: &WeightedGrid<f64>, f: &GridDensity<f64>, g: &GridDensity<f64>) -> Result<W2Result<f64>> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let n = grid.n;
    if n > LP_MAX_N {
        return Err(Error::Scale { n, max: LP_MAX_N });
    }
    check_pair(grid, f, g)?;
    let a = f.masses(grid);
    let b = g.masses(grid);
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let d = grid.dist(i, j);
            vars.push(p.add_var(d * d, (0.0, f64::INFINITY)));
        }
    }
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (vars[i * n + j], 1.0)).collect();
        p.add_constraint(row.as_slice(), ComparisonOp::Eq, a[i] / sa);
    }
    // One column constraint is implied by the others.
    for j in 0..n - 1 {
        let col: Vec<_> = (0..n).map(|i| (vars[i * n + j], 1.0)).collect();
        p.add_constraint(col.as_slice(), ComparisonOp::Eq, b[j] / sb);
    }
    let sol = p.solve().map_err(|e| Error::Lp(e.to_string()))?;
    let coupling: Vec<f64> = vars.iter().map(|v| sol[*v].max(0.0)).collect();
    let row_residual = (0..n)
        .map(|i| (coupling[i * n..(i + 1) * n].iter().sum::<f64>() - a[i] / sa).abs())
        .fold(0.0, f64::max);
    let col_residual = (0..n)
        .map(|j| ((0..n).map(|i| coupling[i * n + j]).sum::<f64>() - b[j] / sb).abs())
        .fold(0.0, f64::max);
    let cost: f64 = (0..n * n).map(|k| coupling[k] * grid.dist(k / n, k % n).powi(2)).sum();
    Ok(W2Result {
        distance: cost.max(0.0).sqrt(),
        method: W2Method::Lp,
        plan: Some(TransportPlan { n, coupling, row_residual, col_residual }),
        offset: None,
    })
}

/// Deposits mass `m` spread uniformly over `[y0, y1]` onto grid cells.
fn deposit<T: Real>(grid: &WeightedGrid<T>, out: &mut [T], y0: T, y1: T, m: T) {
    let n = grid.n;
    let origin = match grid.kind {
        GridKind::Circle => grid.a - grid.dx * T::c(0.5),
        GridKind::Interval => grid.a,
    };
    let cell = |y: T| -> i64 { ((y - origin) / grid.dx).floor().to_i64().unwrap() };
    let wrap = |c: i64| -> usize {
        match grid.kind {
            GridKind::Circle => c.rem_euclid(n as i64) as usize,
            GridKind::Interval => c.clamp(0, n as i64 - 1) as usize,
        }
    };
    let (lo, hi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
    let len = hi - lo;
    let (c0, c1) = (cell(lo), cell(hi));
    if c0 == c1 || len <= T::epsilon() * grid.dx {
        out[wrap(c0)] += m;
        return;
    }
    for c in c0..=c1 {
        let left = origin + grid.dx * T::from_i64(c).unwrap();
        let right = left + grid.dx;
        let overlap = hi.min(right) - lo.max(left);
        if overlap > T::zero() {
            out[wrap(c)] += m * overlap / len;
        }
    }
}

/// Displacement interpolation `H_s⁻¹ = (1−s)F⁻¹ + sG⁻¹`, deposited back onto the grid.
pub fn w2_geodesic<T: Real>(grid: &WeightedGrid<T>, f: &GridDensity<T>, g: &GridDensity<T>, s: T) -> Result<GridDensity<T>> {
    if !(s >= T::zero() && s <= T::one()) {
        return Err(Error::Parameter(format!("geodesic time {s} outside [0, 1]")));
    }
    check_pair(grid, f, g)?;
    let a = quantile_segments(grid, &f.masses(grid), MassModel::Cell);
    let b0 = quantile_segments(grid, &g.masses(grid), MassModel::Cell);
    let b = match grid.kind {
        GridKind::Interval => b0,
        GridKind::Circle => {
            let (_, theta) = minimize_offset(&a, &b0, grid.length());
            shifted(&b0, theta, grid.length())
        }
    };
    let mut mass = vec![T::zero(); grid.n];
    let (mut i, mut j) = (0, 0);
    let mut u = T::zero();
    let r = T::one() - s;
    while i < a.len() && j < b.len() {
        let hi = a[i].u1.min(b[j].u1);
        if hi > u {
            let y0 = r * a[i].at(u) + s * b[j].at(u);
            let y1 = r * a[i].at(hi) + s * b[j].at(hi);
            deposit(grid, &mut mass, y0, y1, hi - u);
            u = hi;
        }
        let (ea, eb) = (a[i].u1 <= hi, b[j].u1 <= hi);
        if ea {
            i += 1;
        }
        if eb {
            j += 1;
        }
    }
    let values: Vec<T> = mass.iter().zip(&grid.weights).map(|(m, w)| *m / *w).collect();
    GridDensity::normalized(grid, values).map_err(|e| Error::Rebinning(e.to_string()))
}

/// `Q_sψ(x_i) = min_j ψ_j + d(x_i, x_j)²/(2s)` over grid nodes.
pub fn hopf_lax<T: Real>(grid: &WeightedGrid<T>, psi: &[T], s: T) -> Result<Vec<T>> {
    grid.check_len(psi)?;
    if !(s > T::zero()) {
        return Err(Error::Parameter(format!("Hopf-Lax time {s} must be positive")));
    }
    let two_s = s + s;
    Ok((0..grid.n)
        .map(|i| {
            (0..grid.n)
                .map(|j| {
                    let d = grid.dist(i, j);
                    psi[j] + d * d / two_s
                })
                .fold(T::infinity(), T::min)
        })
        .collect())
}

/// Per-node `|∂_sQ_sψ + ½|∇Q_sψ|²|`: centred difference in `s`, Godunov upwind slope.
pub fn hj_residual<T: Real>(grid: &WeightedGrid<T>, psi: &[T], s: T, ds: T) -> Result<Vec<T>> {
    if !(ds > T::zero() && s > ds) {
        return Err(Error::Parameter(format!("need s > ds > 0, got s = {s}, ds = {ds}")));
    }
    let plus = hopf_lax(grid, psi, s + ds)?;
    let minus = hopf_lax(grid, psi, s - ds)?;
    let q = hopf_lax(grid, psi, s)?;
    let n = grid.n;
    let dx = grid.dx;
    let half = T::c(0.5);
    Ok((0..n)
        .map(|i| {
            let back = match (grid.kind, i) {
                (GridKind::Interval, 0) => None,
                _ => Some((q[i] - q[(i + n - 1) % n]) / dx),
            };
            let fwd = match (grid.kind, i) {
                (GridKind::Interval, k) if k == n - 1 => None,
                _ => Some((q[(i + 1) % n] - q[i]) / dx),
            };
            let slope2 = match (back, fwd) {
                (Some(b), Some(f)) => b.max(T::zero()).powi(2).max(f.min(T::zero()).powi(2)),
                (Some(b), None) => b * b,
                (None, Some(f)) => f * f,
                (None, None) => T::zero(),
            };
            ((plus[i] - minus[i]) / (ds + ds) + half * slope2).abs()
        })
        .collect())
}

/// Discrete Lipschitz seminorm `max |ψ_i − ψ_j| / d(x_i, x_j)`.
pub fn lipschitz<T: Real>(grid: &WeightedGrid<T>, psi: &[T]) -> T {
    let mut l = T::zero();
    for i in 0..grid.n {
        for j in i + 1..grid.n {
            l = l.max((psi[i] - psi[j]).abs() / grid.dist(i, j));
        }
    }
    l
}

/// `(1/s)(∫Q_sψ f dμ − ∫ψ g dμ)`, a lower bound for `W₂²(fμ, gμ)/(2s²)` (atomic model).
pub fn kantorovich_lower_bound<T: Real>(
    grid: &WeightedGrid<T>,
    f: &GridDensity<T>,
    g: &GridDensity<T>,
    psi: &[T],
    s: T,
) -> Result<T> {
    let q = hopf_lax(grid, psi, s)?;
    Ok((grid.integrate_product(&q, f.values())? - grid.integrate_product(psi, g.values())?) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Potential};

    fn circle(n: usize) -> WeightedGrid<f64> {
        build_grid::<f64>(GridKind::Circle, n, (0.0, std::f64::consts::TAU), &Potential::Zero, true).unwrap()
    }

    #[test]
    fn wrong_method_errors() {
        let c = circle(16);
        let u = GridDensity::uniform(&c).unwrap();
        assert!(matches!(w2_quantile(&c, &u, &u, MassModel::Cell), Err(Error::WrongMethod(..))));
        let i = build_grid::<f64>(GridKind::Interval, 16, (0.0, 1.0), &Potential::Zero, true).unwrap();
        let v = GridDensity::uniform(&i).unwrap();
        assert!(matches!(w2_circle(&i, &v, &v, MassModel::Cell), Err(Error::WrongMethod(..))));
    }

    #[test]
    fn point_masses_on_interval() {
        let g = build_grid::<f64>(GridKind::Interval, 32, (0.0, 1.0), &Potential::Zero, true).unwrap();
        let a = GridDensity::dirac(&g, 3).unwrap();
        let b = GridDensity::dirac(&g, 20).unwrap();
        for model in [MassModel::Atomic, MassModel::Cell] {
            let d = w2_quantile(&g, &a, &b, model).unwrap().distance;
            assert!((d - (g.nodes[20] - g.nodes[3])).abs() < 1e-12);
        }
    }

    #[test]
    fn antipodal_point_masses_on_circle() {
        let g = circle(32);
        let a = GridDensity::dirac(&g, 0).unwrap();
        let b = GridDensity::dirac(&g, 16).unwrap();
        let d = w2_circle(&g, &a, &b, MassModel::Atomic).unwrap().distance;
        assert!((d - std::f64::consts::PI).abs() < 1e-9);
        let b = GridDensity::dirac(&g, 30).unwrap();
        let d = w2_circle(&g, &a, &b, MassModel::Atomic).unwrap().distance;
        assert!((d - 2.0 * g.dx).abs() < 1e-9);
    }

    #[test]
    fn lp_two_atoms_against_enumeration() {
        let g = build_grid::<f64>(GridKind::Interval, 8, (0.0, 1.0), &Potential::Zero, true).unwrap();
        let w = g.weights[0];
        let mut fa = vec![0.0; 8];
        fa[1] = 0.3 / w;
        fa[6] = 0.7 / w;
        let mut fb = vec![0.0; 8];
        fb[2] = 0.6 / w;
        fb[4] = 0.4 / w;
        let f = GridDensity::new(&g, fa).unwrap();
        let h = GridDensity::new(&g, fb).unwrap();
        // Vertices of the 2x2 transport polytope: p = mass sent 1 -> 2 ranges over [0, 0.3].
        let (x1, x6, x2, x4) = (g.nodes[1], g.nodes[6], g.nodes[2], g.nodes[4]);
        let cost = |p: f64| {
            p * (x1 - x2).powi(2) + (0.3 - p) * (x1 - x4).powi(2) + (0.6 - p) * (x6 - x2).powi(2) + (0.1 + p) * (x6 - x4).powi(2)
        };
        let best = cost(0.0).min(cost(0.3));
        let lp = w2_lp(&g, &f, &h).unwrap();
        assert!((lp.distance.powi(2) - best).abs() < 1e-12);
        let plan = lp.plan.unwrap();
        assert!(plan.row_residual < 1e-9 && plan.col_residual < 1e-9);
        assert!((plan.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lp_scale_limit() {
        let g = circle(130);
        let u = GridDensity::uniform(&g).unwrap();
        assert!(matches!(w2_lp(&g, &u, &u), Err(Error::Scale { .. })));
    }

    #[test]
    fn geodesic_midpoint_of_point_masses() {
        let g = build_grid::<f64>(GridKind::Interval, 32, (0.0, 1.0), &Potential::Zero, true).unwrap();
        let a = GridDensity::dirac(&g, 4).unwrap();
        let b = GridDensity::dirac(&g, 12).unwrap();
        let mid = w2_geodesic(&g, &a, &b, 0.5).unwrap();
        let masses = mid.masses(&g);
        assert!((masses[8] - 1.0).abs() < 1e-9);
        assert!(matches!(w2_geodesic(&g, &a, &b, 1.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn hopf_lax_basics() {
        let g = circle(32);
        let q = hopf_lax(&g, &vec![2.5; 32], 0.3).unwrap();
        assert!(q.iter().all(|v| (v - 2.5).abs() < 1e-15));
        assert!(hopf_lax(&g, &vec![0.0; 32], 0.0).is_err());
        assert!(hj_residual(&g, &vec![1.0; 32], 0.1, 0.2).is_err());
    }
}
