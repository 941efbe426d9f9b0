//! Weighted 1-D grids, the reversible generator `L = Δ − V′∂` and its Γ-calculus.

use crate::error::{Error, Result};
use crate::report::{anchor, CheckReport};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Circle,
    Interval,
}

/// Potential `V`, given analytically or by node samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential<T> {
    Zero,
    /// `V(x) = x²/2`.
    Quadratic,
    /// `V(x) = Σ c_k x^k`.
    Polynomial(Vec<T>),
    /// Values at the nodes; the derivative is taken by central differences.
    Samples(Vec<T>),
}

impl<T: Real> Potential<T> {
    /// `(V(x), V′(x))` for analytic variants.
    pub fn eval(&self, x: T) -> Option<(T, T)> {
        match self {
            Potential::Zero => Some((T::zero(), T::zero())),
            Potential::Quadratic => Some((x * x / T::c(2.0), x)),
            Potential::Polynomial(c) => {
                let mut v = T::zero();
                let mut dv = T::zero();
                for (k, ck) in c.iter().enumerate().rev() {
                    v = v * x + *ck;
                    if k > 0 {
                        dv = dv * x + *ck * T::from_usize(k).unwrap();
                    }
                }
                Some((v, dv))
            }
            Potential::Samples(_) => None,
        }
    }
}

/// Discretized space with its reference measure `μ = Σ w_i δ_{x_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGrid<T> {
    pub kind: GridKind,
    pub n: usize,
    pub a: T,
    pub b: T,
    pub dx: T,
    pub nodes: Vec<T>,
    pub potential: Vec<T>,
    pub dpotential: Vec<T>,
    pub weights: Vec<T>,
    pub normalized: bool,
}

/// Builds a grid. Circle nodes are `a + k·dx`, interval nodes are cell centres
/// `a + (k + ½)·dx`, with `dx = (b − a)/n` in both cases.
pub fn build_grid<T: Real>(
    kind: GridKind,
    n: usize,
    domain: (T, T),
    potential: &Potential<T>,
    normalize: bool,
) -> Result<WeightedGrid<T>> {
    if n < 8 {
        return Err(Error::Size(n));
    }
    let (a, b) = domain;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Domain(a.f64(), b.f64()));
    }
    let nt = T::from_usize(n).unwrap();
    let dx = (b - a) / nt;
    let half = T::c(0.5);
    let nodes: Vec<T> = (0..n)
        .map(|k| {
            let k = T::from_usize(k).unwrap();
            match kind {
                GridKind::Circle => a + k * dx,
                GridKind::Interval => a + (k + half) * dx,
            }
        })
        .collect();

    let (v, dv): (Vec<T>, Vec<T>) = match potential {
        Potential::Samples(s) => {
            if s.len() != n {
                return Err(Error::Shape { expected: n, got: s.len() });
            }
            let dv = (0..n)
                .map(|i| match kind {
                    GridKind::Circle => (s[(i + 1) % n] - s[(i + n - 1) % n]) / (dx + dx),
                    GridKind::Interval => {
                        if i == 0 {
                            (s[1] - s[0]) / dx
                        } else if i == n - 1 {
                            (s[n - 1] - s[n - 2]) / dx
                        } else {
                            (s[i + 1] - s[i - 1]) / (dx + dx)
                        }
                    }
                })
                .collect();
            (s.clone(), dv)
        }
        p => nodes.iter().map(|&x| p.eval(x).unwrap()).unzip(),
    };
    for (i, (vi, dvi)) in v.iter().zip(&dv).enumerate() {
        if !vi.is_finite() || !dvi.is_finite() {
            return Err(Error::NonFinitePotential { node: i, x: nodes[i].f64() });
        }
    }

    let mut weights: Vec<T> = v.iter().map(|&vi| (-vi).exp() * dx).collect();
    if normalize {
        let total: T = weights.iter().copied().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    if let Some((i, _)) = weights.iter().enumerate().find(|(_, w)| !(**w > T::zero())) {
        return Err(Error::NonFinitePotential { node: i, x: nodes[i].f64() });
    }

    Ok(WeightedGrid { kind, n, a, b, dx, nodes, potential: v, dpotential: dv, weights, normalized: normalize })
}

impl<T: Real> WeightedGrid<T> {
    /// Domain length.
    pub fn length(&self) -> T {
        self.b - self.a
    }

    /// Geodesic distance between nodes `i` and `j`.
    pub fn dist(&self, i: usize, j: usize) -> T {
        let d = (self.nodes[i] - self.nodes[j]).abs();
        match self.kind {
            GridKind::Circle => d.min(self.length() - d),
            GridKind::Interval => d,
        }
    }

    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// `∫ f dμ = Σ f_i w_i`.
    pub fn integrate(&self, f: &[T]) -> Result<T> {
        self.check_len(f)?;
        Ok(f.iter().zip(&self.weights).map(|(a, w)| *a * *w).sum())
    }

    /// `∫ f g dμ`.
    pub fn integrate_product(&self, f: &[T], g: &[T]) -> Result<T> {
        self.check_len(f)?;
        self.check_len(g)?;
        Ok(f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| *a * *b * *w).sum())
    }

    pub fn check_len(&self, f: &[T]) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: f.len() });
        }
        Ok(())
    }

    /// Samples `h` at the nodes.
    pub fn sample(&self, h: impl Fn(T) -> T) -> Vec<T> {
        self.nodes.iter().map(|&x| h(x)).collect()
    }

    /// Nodes at which pointwise curvature quantities are meaningful: all nodes on
    /// the circle, the interval without its two-node boundary layer.
    pub fn cd_nodes(&self) -> std::ops::Range<usize> {
        match self.kind {
            GridKind::Circle => 0..self.n,
            GridKind::Interval => 2..self.n - 2,
        }
    }

    /// Edges `(i, i+1)` of the nearest-neighbour graph.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self.kind {
            GridKind::Circle => (0..self.n).map(|i| (i, (i + 1) % self.n)).collect(),
            GridKind::Interval => (0..self.n - 1).map(|i| (i, i + 1)).collect(),
        }
    }
}

/// Probability density with respect to `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity<T> {
    values: Vec<T>,
}

pub(crate) fn mass_tol<T: Real>() -> T {
    T::c(1e-10).max(T::epsilon() * T::c(1e4))
}

impl<T: Real> GridDensity<T> {
    /// Validates nonnegativity and unit mass (within 1e−10).
    pub fn new(grid: &WeightedGrid<T>, values: Vec<T>) -> Result<Self> {
        grid.check_len(&values)?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= T::zero())) {
            return Err(Error::Density(format!("value {v} at node {i}")));
        }
        let mass = grid.integrate(&values)?;
        if (mass - T::one()).abs() > mass_tol() {
            return Err(Error::Density(format!("mass {mass} differs from 1")));
        }
        Ok(Self { values })
    }

    /// Rescales a nonnegative profile to unit mass.
    pub fn normalized(grid: &WeightedGrid<T>, mut values: Vec<T>) -> Result<Self> {
        grid.check_len(&values)?;
        let mass = grid.integrate(&values)?;
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::Density(format!("profile mass {mass} is not positive")));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Self::new(grid, values)
    }

    /// Clips roundoff negatives and renormalizes; for semigroup outputs.
    pub fn from_evolved(grid: &WeightedGrid<T>, mut values: Vec<T>) -> Result<Self> {
        values.iter_mut().for_each(|v| {
            if *v < T::zero() {
                *v = T::zero()
            }
        });
        Self::normalized(grid, values)
    }

    /// Mass concentrated on a single node.
    pub fn dirac(grid: &WeightedGrid<T>, node: usize) -> Result<Self> {
        let mut v = vec![T::zero(); grid.n];
        v[node] = T::one() / grid.weights[node];
        Self::new(grid, v)
    }

    pub fn uniform(grid: &WeightedGrid<T>) -> Result<Self> {
        Self::normalized(grid, vec![T::one(); grid.n])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Node masses `f_i w_i`.
    pub fn masses(&self, grid: &WeightedGrid<T>) -> Vec<T> {
        self.values.iter().zip(&grid.weights).map(|(f, w)| *f * *w).collect()
    }
}

/// Curvature lower bound `R` and dimension upper bound `m` (possibly infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureParams<T> {
    pub r: T,
    pub m: T,
}

impl<T: Real> CurvatureParams<T> {
    pub fn new(r: T, m: T) -> Result<Self> {
        if !(m > T::zero()) || r.is_nan() {
            return Err(Error::Parameter(format!("need m > 0, got R = {r}, m = {m}")));
        }
        Ok(Self { r, m })
    }

    /// `1/m`, zero for `m = ∞`.
    pub fn inv_m(&self) -> T {
        if self.m.is_infinite() {
            T::zero()
        } else {
            T::one() / self.m
        }
    }

    /// `R/m`, the curvature parameter of the `s`-function.
    pub fn r_over_m(&self) -> T {
        self.r * self.inv_m()
    }
}

/// Dense generator matrix (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

/// Assembles `L` with μ-symmetric rates; rejects grids whose drift makes a rate negative.
pub fn build_generator<T: Real>(grid: &WeightedGrid<T>) -> Result<GeneratorMatrix<T>> {
    let n = grid.n;
    let dx = grid.dx;
    let diff = T::one() / (dx * dx);
    let mut up = Vec::with_capacity(n);
    let mut down = Vec::with_capacity(n);
    for i in 0..n {
        let drift = grid.dpotential[i] / (dx + dx);
        let (u, d) = (diff - drift, diff + drift);
        let bad = if u < T::zero() { Some(u) } else if d < T::zero() { Some(d) } else { None };
        if let Some(rate) = bad {
            return Err(Error::Stability { node: i, x: grid.nodes[i].f64(), rate: rate.f64() });
        }
        up.push(u);
        down.push(d);
    }
    let mut entries = vec![T::zero(); n * n];
    let w = &grid.weights;
    let half = T::c(0.5);
    for (i, j) in grid.edges() {
        let k = half * (w[i] * up[i] + w[j] * down[j]);
        entries[i * n + j] += k / w[i];
        entries[j * n + i] += k / w[j];
    }
    let mut gen = GeneratorMatrix { n, entries };
    gen.fix_diagonal();
    Ok(gen)
}

impl<T: Real> GeneratorMatrix<T> {
    pub(crate) fn from_entries(n: usize, entries: Vec<T>) -> Self {
        assert_eq!(entries.len(), n * n);
        let mut g = Self { n, entries };
        g.fix_diagonal();
        g
    }

    fn fix_diagonal(&mut self) {
        let n = self.n;
        for i in 0..n {
            self.entries[i * n + i] = T::zero();
            let s: T = self.entries[i * n..(i + 1) * n].iter().copied().sum();
            self.entries[i * n + i] = -s;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    fn check(&self, f: &[T]) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: f.len() });
        }
        Ok(())
    }

    /// `Lf`.
    pub fn apply(&self, f: &[T]) -> Result<Vec<T>> {
        self.check(f)?;
        Ok(self.apply_unchecked(f))
    }

    pub(crate) fn apply_unchecked(&self, f: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let row = &self.entries[i * n..(i + 1) * n];
                // Rows are sparse; skipping zeros keeps this close to O(n) per row in practice.
                let mut acc = T::zero();
                for (l, x) in row.iter().zip(f) {
                    if *l != T::zero() {
                        acc += *l * *x;
                    }
                }
                acc
            })
            .collect()
    }

    /// `Γ(f,g) = ½(L(fg) − f Lg − g Lf)`, evaluated as `½Σ_j L_ij (f_j − f_i)(g_j − g_i)`
    /// so that it vanishes exactly on constants.
    pub fn gamma(&self, f: &[T], g: &[T]) -> Result<Vec<T>> {
        self.check(f)?;
        self.check(g)?;
        let n = self.n;
        let half = T::c(0.5);
        Ok((0..n)
            .map(|i| {
                let row = &self.entries[i * n..(i + 1) * n];
                let mut acc = T::zero();
                for (j, l) in row.iter().enumerate() {
                    if j != i && *l != T::zero() {
                        acc += *l * (f[j] - f[i]) * (g[j] - g[i]);
                    }
                }
                half * acc
            })
            .collect())
    }

    /// `Γ(f) = Γ(f,f)`.
    pub fn gamma_sq(&self, f: &[T]) -> Result<Vec<T>> {
        self.gamma(f, f)
    }

    /// `Γ₂(f) = ½(LΓ(f) − 2Γ(f, Lf))`.
    pub fn gamma2(&self, f: &[T]) -> Result<Vec<T>> {
        let gf = self.gamma_sq(f)?;
        let lgf = self.apply_unchecked(&gf);
        let lf = self.apply_unchecked(f);
        let cross = self.gamma(f, &lf)?;
        let half = T::c(0.5);
        Ok((0..self.n).map(|i| half * lgf[i] - cross[i]).collect())
    }

    /// `max_i |Σ_j L_ij|`.
    pub fn row_sum_residual(&self) -> T {
        (0..self.n)
            .map(|i| self.entries[i * self.n..(i + 1) * self.n].iter().copied().sum::<T>().abs())
            .fold(T::zero(), T::max)
    }

    /// `max_{ij} |ρ_i L_ij − ρ_j L_ji|` for the weights `ρ`.
    pub fn symmetry_residual(&self, rho: &[T]) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((rho[i] * self.get(i, j) - rho[j] * self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Smallest off-diagonal entry.
    pub fn min_off_diagonal(&self) -> T {
        let n = self.n;
        let mut m = T::infinity();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.min(self.get(i, j));
                }
            }
        }
        m
    }
}

/// Per-node `Γ₂(f) − RΓ(f) − (Lf)²/m`, together with `Γ(f)`.
fn cd_terms<T: Real>(gen: &GeneratorMatrix<T>, f: &[T]) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let g2 = gen.gamma2(f)?;
    let g = gen.gamma_sq(f)?;
    let lf = gen.apply(f)?;
    Ok((g2, g, lf))
}

/// Pointwise curvature-dimension test over a family of test functions.
pub fn check_pointwise_cd<T: Real>(
    gen: &GeneratorMatrix<T>,
    grid: &WeightedGrid<T>,
    params: CurvatureParams<T>,
    family: &[Vec<T>],
    tol: T,
) -> Result<CheckReport> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let inv_m = params.inv_m();
    let mut best: Option<(T, T, T, usize, usize)> = None;
    for (k, f) in family.iter().enumerate() {
        let (g2, g, lf) = cd_terms(gen, f)?;
        for i in grid.cd_nodes() {
            let demand = params.r * g[i] + inv_m * lf[i] * lf[i];
            let margin = g2[i] - demand;
            if best.is_none_or(|b| margin < b.0) {
                best = Some((margin, demand, g2[i], i, k));
            }
        }
    }
    let (_, lhs, rhs, node, k) = best.unwrap();
    Ok(CheckReport::new("cd-pointwise", anchor::CD_POINTWISE, lhs.f64(), rhs.f64(), tol.f64())
        .with("R", params.r)
        .with("m", params.m)
        .with("n", grid.n)
        .with("node", node)
        .with("function", k))
}

/// Integrated curvature-dimension test against a nonnegative weight `g`:
/// `½∫Γ(f)Lg − ∫Γ(f,Lf)g ≥ R∫Γ(f)g + (1/m)∫(Lf)²g`.
pub fn check_weak_cd<T: Real>(
    gen: &GeneratorMatrix<T>,
    grid: &WeightedGrid<T>,
    params: CurvatureParams<T>,
    f: &[T],
    g: &[T],
    tol: T,
) -> Result<CheckReport> {
    grid.check_len(f)?;
    grid.check_len(g)?;
    if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(**v >= T::zero())) {
        return Err(Error::Density(format!("weight {v} < 0 at node {i}")));
    }
    let gf = gen.gamma_sq(f)?;
    let lf = gen.apply(f)?;
    let lg = gen.apply(g)?;
    let cross = gen.gamma(f, &lf)?;
    let half = T::c(0.5);
    let supply = half * grid.integrate_product(&gf, &lg)? - grid.integrate_product(&cross, g)?;
    let lf2: Vec<T> = lf.iter().map(|x| *x * *x).collect();
    let demand = params.r * grid.integrate_product(&gf, g)? + params.inv_m() * grid.integrate_product(&lf2, g)?;
    Ok(CheckReport::new("cd-weak", anchor::CD_WEAK, demand.f64(), supply.f64(), tol.f64())
        .with("R", params.r)
        .with("m", params.m)
        .with("n", grid.n))
}

/// Absolute Γ threshold of the best-R estimator.
pub const GAMMA_FLOOR: f64 = 1e-12;
/// Relative Γ gate of the best-R estimator (fraction of `max Γ(f)`).
pub const GAMMA_RELATIVE_GATE: f64 = 0.1;

/// Largest `R` passing the pointwise test at tolerance 0:
/// `min (Γ₂(f) − (Lf)²/m)/Γ(f)` over gated nodes and the family.
pub fn estimate_best_r<T: Real>(
    gen: &GeneratorMatrix<T>,
    grid: &WeightedGrid<T>,
    m: T,
    family: &[Vec<T>],
) -> Result<T> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if !(m > T::zero()) {
        return Err(Error::Parameter(format!("m = {m}")));
    }
    let inv_m = if m.is_infinite() { T::zero() } else { T::one() / m };
    let floor = T::c(GAMMA_FLOOR);
    let mut best: Option<T> = None;
    for f in family {
        let (g2, g, lf) = cd_terms(gen, f)?;
        let gmax = grid.cd_nodes().map(|i| g[i]).fold(T::zero(), T::max);
        let gate = floor.max(T::c(GAMMA_RELATIVE_GATE) * gmax);
        for i in grid.cd_nodes() {
            if g[i] > gate {
                let r = (g2[i] - inv_m * lf[i] * lf[i]) / g[i];
                best = Some(best.map_or(r, |b| b.min(r)));
            }
        }
    }
    best.ok_or(Error::UndefinedR)
}

/// `{1, sin kθ, cos kθ : 1 ≤ k ≤ kmax}` with `θ` the angle along the domain.
pub fn trig_family<T: Real>(grid: &WeightedGrid<T>, kmax: usize) -> Vec<Vec<T>> {
    let omega = T::TAU() / grid.length();
    let mut fam = vec![vec![T::one(); grid.n]];
    for k in 1..=kmax {
        let kk = T::from_usize(k).unwrap() * omega;
        fam.push(grid.sample(|x| (kk * (x - grid.a)).sin()));
        fam.push(grid.sample(|x| (kk * (x - grid.a)).cos()));
    }
    fam
}

/// The function with `f′ = e^{−V/(m−1)}` (`f′ = 1` for `m = ∞`), which attains the
/// 1-D bound `Γ₂ − (Lf)²/m ≥ (V″ − V′²/(m−1))Γ` with equality.
pub fn extremal_function<T: Real>(grid: &WeightedGrid<T>, m: T) -> Vec<T> {
    let slope: Vec<T> = grid
        .potential
        .iter()
        .map(|&v| if m.is_infinite() { T::one() } else { (-v / (m - T::one())).exp() })
        .collect();
    let mut f = vec![T::zero(); grid.n];
    let half = T::c(0.5);
    for i in 1..grid.n {
        f[i] = f[i - 1] + half * (slope[i - 1] + slope[i]) * grid.dx;
    }
    f
}

/// Default family on an interval: constants, monomials up to degree 4, Neumann
/// cosines, and (for `m > 1`) the extremal function.
pub fn interval_family<T: Real>(grid: &WeightedGrid<T>, m: T) -> Vec<Vec<T>> {
    let mut fam = vec![vec![T::one(); grid.n]];
    for p in 1..=4 {
        fam.push(grid.sample(|x| x.powi(p)));
    }
    let len = grid.length();
    for k in 1..=2 {
        let kk = T::PI() * T::from_usize(k).unwrap() / len;
        fam.push(grid.sample(|x| (kk * (x - grid.a)).cos()));
    }
    if m > T::one() {
        fam.push(extremal_function(grid, m));
    }
    fam
}

/// Default pointwise-CD family for a grid.
pub fn default_family<T: Real>(grid: &WeightedGrid<T>, m: T) -> Vec<Vec<T>> {
    match grid.kind {
        GridKind::Circle => trig_family(grid, 2),
        GridKind::Interval => interval_family(grid, m),
    }
}
