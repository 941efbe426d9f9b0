//! Finite-dimensional gradient flows `dX/dt = −∇F(X)` and the `(R, m)`-convexity of `F`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::report::{anchor, CheckReport};
use crate::scalar::{extrapolate_to_zero, simpson, Real};

type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Potential `F: ℝ^d → ℝ`.
#[derive(Clone)]
pub enum PotentialSpec<T> {
    /// `F = c‖x‖²/2`.
    Quadratic { dim: usize, scale: T },
    /// `F = ½Σ a_i x_i²`.
    Diagonal { coeffs: Vec<T> },
    /// `F ≡ value`.
    Constant { dim: usize, value: T },
    /// `F = (x² − 1)²/4` in one dimension.
    DoubleWell,
    /// User function with central-difference gradient of step `h_g`.
    Custom { dim: usize, f: ScalarFn<T>, h_g: T },
}

impl<T: Real> fmt::Debug for PotentialSpec<T> {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Quadratic { dim, scale } => write!(fm, "Quadratic {{ dim: {dim}, scale: {scale} }}"),
            PotentialSpec::Diagonal { coeffs } => write!(fm, "Diagonal {{ coeffs: {coeffs:?} }}"),
            PotentialSpec::Constant { dim, value } => write!(fm, "Constant {{ dim: {dim}, value: {value} }}"),
            PotentialSpec::DoubleWell => write!(fm, "DoubleWell"),
            PotentialSpec::Custom { dim, h_g, .. } => write!(fm, "Custom {{ dim: {dim}, h_g: {h_g} }}"),
        }
    }
}

impl<T: Real> PotentialSpec<T> {
    pub fn dim(&self) -> usize {
        match self {
            PotentialSpec::Quadratic { dim, .. } | PotentialSpec::Constant { dim, .. } | PotentialSpec::Custom { dim, .. } => {
                *dim
            }
            PotentialSpec::Diagonal { coeffs } => coeffs.len(),
            PotentialSpec::DoubleWell => 1,
        }
    }

    fn check(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn value(&self, x: &[T]) -> T {
        let half = T::c(0.5);
        match self {
            PotentialSpec::Quadratic { scale, .. } => half * *scale * x.iter().map(|v| *v * *v).sum::<T>(),
            PotentialSpec::Diagonal { coeffs } => half * coeffs.iter().zip(x).map(|(a, v)| *a * *v * *v).sum::<T>(),
            PotentialSpec::Constant { value, .. } => *value,
            PotentialSpec::DoubleWell => {
                let q = x[0] * x[0] - T::one();
                q * q / T::c(4.0)
            }
            PotentialSpec::Custom { f, .. } => f(x),
        }
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        match self {
            PotentialSpec::Quadratic { scale, .. } => x.iter().map(|v| *scale * *v).collect(),
            PotentialSpec::Diagonal { coeffs } => coeffs.iter().zip(x).map(|(a, v)| *a * *v).collect(),
            PotentialSpec::Constant { dim, .. } => vec![T::zero(); *dim],
            PotentialSpec::DoubleWell => vec![x[0] * (x[0] * x[0] - T::one())],
            PotentialSpec::Custom { h_g, .. } => fd_gradient(|y| self.value(y), x, *h_g),
        }
    }

    /// `max ‖∇F − FD(F)‖_∞` over the points, with central differences of step `h_g`.
    pub fn gradient_consistency(&self, points: &[Vec<T>], h_g: T) -> Result<T> {
        let mut worst = T::zero();
        for p in points {
            self.check(p)?;
            let fd = fd_gradient(|y| self.value(y), p, h_g);
            for (a, b) in self.gradient(p).iter().zip(&fd) {
                worst = worst.max((*a - *b).abs());
            }
        }
        Ok(worst)
    }
}

fn fd_gradient<T: Real>(f: impl Fn(&[T]) -> T, x: &[T], h: T) -> Vec<T> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (h + h)
        })
        .collect()
}

fn axpy<T: Real>(x: &[T], a: T, k: &[T]) -> Vec<T> {
    x.iter().zip(k).map(|(xi, ki)| *xi + a * *ki).collect()
}

fn norm2<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| *v * *v).sum()
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(a, b)| *a * *b).sum()
}

/// Norm above which a trajectory is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Sampled solution of the gradient flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub dt: T,
    pub scheme: &'static str,
    /// `F(X_{t+dt}) ≤ F(X_t) + 1e−9` held along the whole run.
    pub energy_monotone: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &[T] {
        self.states.last().expect("trajectory has an initial state")
    }

    /// Whether every state lies in the cube `[lo, hi]^d`.
    pub fn within(&self, lo: T, hi: T) -> bool {
        self.states.iter().all(|s| s.iter().all(|v| *v >= lo && *v <= hi))
    }

    /// CSV with columns `t, x1..xd, F`.
    pub fn write_csv<W: Write>(&self, pot: &PotentialSpec<T>, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.states.first().map_or(0, |s| s.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("x{i}")));
        header.push("F".into());
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![t.to_string()];
            row.extend(s.iter().map(|v| v.to_string()));
            row.push(pot.value(s).to_string());
            w.write_record(&row)?;
        }
        w.flush()
    }
}

/// Classical fourth-order Runge–Kutta integration on `[0, t_end]`; the last step is
/// shortened if `t_end` is not a multiple of `dt`.
pub fn flow_rk4<T: Real>(pot: &PotentialSpec<T>, x0: &[T], t_end: T, dt: T) -> Result<Trajectory<T>> {
    pot.check(x0)?;
    if !(dt > T::zero()) || !(t_end >= dt) {
        return Err(Error::Parameter(format!("need dt > 0 and T >= dt, got dt = {dt}, T = {t_end}")));
    }
    let steps = (t_end / dt - T::c(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
    let bound = T::c(DIVERGENCE_BOUND);
    let half = T::c(0.5);
    let sixth = T::one() / T::c(6.0);
    let rhs = |x: &[T]| -> Vec<T> { pot.gradient(x).into_iter().map(|g| -g).collect() };
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(T::zero());
    states.push(x0.to_vec());
    let mut monotone = true;
    let mut x = x0.to_vec();
    let mut fx = pot.value(&x);
    for k in 0..steps {
        let t = times[k];
        let h = dt.min(t_end - t);
        let k1 = rhs(&x);
        let k2 = rhs(&axpy(&x, half * h, &k1));
        let k3 = rhs(&axpy(&x, half * h, &k2));
        let k4 = rhs(&axpy(&x, h, &k3));
        for i in 0..x.len() {
            x[i] += h * sixth * (k1[i] + T::c(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        let nx = norm2(&x).sqrt();
        if !nx.is_finite() || nx > bound {
            return Err(Error::Divergence { t: (t + h).f64(), bound: DIVERGENCE_BOUND });
        }
        let f_new = pot.value(&x);
        monotone &= f_new <= fx + T::c(1e-9);
        fx = f_new;
        times.push(if k + 1 == steps { t_end } else { t + h });
        states.push(x.clone());
    }
    Ok(Trajectory { times, states, dt, scheme: "rk4", energy_monotone: monotone })
}

/// Point, direction and offset of the worst sampled convexity margin.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness<T> {
    pub x: Vec<T>,
    pub h: Vec<T>,
    pub s: T,
}

#[derive(Debug, Clone)]
pub struct ConvexityCheck<T> {
    pub report: CheckReport,
    pub witness: Witness<T>,
}

/// `φ′(s), φ″(s)` for `φ(s) = F(x + s h)` by central differences of step `step`.
pub fn directional_derivatives<T: Real>(pot: &PotentialSpec<T>, x: &[T], h: &[T], s: T, step: T) -> (T, T) {
    let phi = |r: T| pot.value(&axpy(x, r, h));
    let (p, c, m) = (phi(s + step), phi(s), phi(s - step));
    ((p - m) / (step + step), (p - c - c + m) / (step * step))
}

/// Samples `(x, h, s)` in the cube `[lo, hi]^d` (with `x + s h` and its difference
/// stencil inside the cube, `‖h‖ = 1`) and reports the worst margin of
/// `φ″(s) ≥ R‖h‖² + φ′(s)²/m`.
pub fn check_cd_convexity<T: Real>(
    pot: &PotentialSpec<T>,
    r: T,
    m: T,
    cube: (T, T),
    n_samples: usize,
    step: T,
    seed: u64,
) -> Result<ConvexityCheck<T>> {
    if !(m > T::zero()) || !(step > T::zero()) || !(cube.1 > cube.0) || n_samples == 0 {
        return Err(Error::Parameter(format!(
            "need m > 0, step > 0, nonempty cube and samples; got m = {m}, step = {step}"
        )));
    }
    let d = pot.dim();
    let inv_m = if m.is_infinite() { T::zero() } else { T::one() / m };
    let (lo, hi) = (cube.0.f64(), cube.1.f64());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(T, T, T, Witness<T>)> = None;
    let mut taken = 0;
    while taken < n_samples {
        let x: Vec<T> = (0..d).map(|_| T::c(rng.gen_range(lo..=hi))).collect();
        let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let nr = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(1e-3..=1.0).contains(&nr) {
            continue;
        }
        let h: Vec<T> = raw.iter().map(|v| T::c(v / nr)).collect();
        let s = T::c(rng.gen_range(-0.1..=0.1) * (hi - lo));
        let reach = s.abs() + step;
        let inside = x.iter().zip(&h).all(|(xi, hi_)| {
            let a = *xi + s * *hi_;
            a - reach * hi_.abs() >= cube.0 && a + reach * hi_.abs() <= cube.1
        });
        if !inside {
            continue;
        }
        taken += 1;
        let (d1, d2) = directional_derivatives(pot, &x, &h, s, step);
        let demand = r * norm2(&h) + inv_m * d1 * d1;
        let margin = d2 - demand;
        if best.as_ref().is_none_or(|b| margin < b.0) {
            best = Some((margin, demand, d2, Witness { x, h, s }));
        }
    }
    let (_, lhs, rhs, witness) = best.expect("at least one sample");
    let tol = 100.0 * step.f64() * step.f64() + 1e-7;
    let report = CheckReport::new("gradflow-convexity", anchor::GRADFLOW_CONVEXITY, lhs.f64(), rhs.f64(), tol)
        .with("R", r)
        .with("m", m)
        .with("samples", n_samples)
        .with("witness_x", format!("{:?}", witness.x.iter().map(|v| v.f64()).collect::<Vec<_>>()))
        .with("witness_h", format!("{:?}", witness.h.iter().map(|v| v.f64()).collect::<Vec<_>>()))
        .with("witness_s", witness.s);
    Ok(ConvexityCheck { report, witness })
}

/// `‖X_t − Y_t‖² ≤ e^{−2Rt}‖X_0 − Y_0‖² − (2/m)∫₀ᵗ e^{−2R(t−u)}(F(X_u) − F(Y_u))² du`
/// at the even multiples of `du` nearest to `T/4, T/2, 3T/4, T`. `du` must be a multiple of
/// `dt` and `T/du` even.
#[allow(clippy::too_many_arguments)]
pub fn check_flow_contraction<T: Real>(
    pot: &PotentialSpec<T>,
    r: T,
    m: T,
    x0: &[T],
    y0: &[T],
    t_end: T,
    dt: T,
    du: T,
) -> Result<Vec<CheckReport>> {
    let ratio = (du / dt).round();
    let intervals = (t_end / du).round();
    if !(m > T::zero())
        || !(du >= dt)
        || (ratio * dt - du).abs() > T::c(1e-9) * du
        || (intervals * du - t_end).abs() > T::c(1e-9) * t_end
        || !intervals.to_usize().unwrap_or(0).is_multiple_of(2)
    {
        return Err(Error::Parameter(format!(
            "need m > 0, du a multiple of dt and T/du even; got m = {m}, dt = {dt}, du = {du}, T = {t_end}"
        )));
    }
    let stride = ratio.to_usize().unwrap();
    let n_int = intervals.to_usize().unwrap();
    let dt_exact = du / ratio;
    let xs = flow_rk4(pot, x0, t_end, dt_exact)?;
    let ys = flow_rk4(pot, y0, t_end, dt_exact)?;
    let inv_m = if m.is_infinite() { T::zero() } else { T::one() / m };
    let d0 = norm2(&axpy(x0, -T::one(), y0));
    let dfs: Vec<T> = (0..=n_int)
        .map(|k| pot.value(&xs.states[k * stride]) - pot.value(&ys.states[k * stride]))
        .collect();
    let tol = 10.0 * dt.f64() + 5.0 * du.f64();
    let mut out = Vec::with_capacity(4);
    for q in 1..=4 {
        let kt = 2 * ((n_int * q + 4) / 8);
        if kt == 0 || out.iter().any(|r: &CheckReport| r.t == Some((du * T::from_usize(kt).unwrap()).f64())) {
            continue;
        }
        let t = du * T::from_usize(kt).unwrap();
        let vals: Vec<T> = (0..=kt)
            .map(|k| {
                let u = du * T::from_usize(k).unwrap();
                (T::c(-2.0) * r * (t - u)).exp() * dfs[k] * dfs[k]
            })
            .collect();
        let integral = if inv_m == T::zero() { T::zero() } else { simpson(&vals, du) };
        let lhs = norm2(&axpy(&xs.states[kt * stride], -T::one(), &ys.states[kt * stride]));
        let rhs = (T::c(-2.0) * r * t).exp() * d0 - T::c(2.0) * inv_m * integral;
        out.push(
            CheckReport::new("gradflow-contraction", anchor::GRADFLOW_CONTRACTION, lhs.f64(), rhs.f64(), tol)
                .at(t.f64())
                .with("R", r)
                .with("m", m)
                .with("dt", dt)
                .with("du", du),
        );
    }
    Ok(out)
}

/// Derivative-at-zero form of the contraction at `X_0 = x`, `Y_0 = x + εh`, divided by
/// `ε²` and extrapolated to `ε → 0`, against the directly differenced convexity margin
/// `φ″(0) − R‖h‖² − φ′(0)²/m`.
///
/// The report passes when the extrapolated margin is `≥ −tol`; `direct_margin` and
/// `consistency` (their difference) are attached as metadata.
pub fn check_converse_taylor<T: Real>(
    pot: &PotentialSpec<T>,
    r: T,
    m: T,
    x: &[T],
    h: &[T],
    eps_list: &[T],
) -> Result<CheckReport> {
    pot.check(x)?;
    pot.check(h)?;
    if eps_list.len() < 2 || eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|e| !(*e > T::zero())) {
        return Err(Error::Parameter("eps_list must be positive and strictly decreasing with at least two entries".into()));
    }
    let inv_m = if m.is_infinite() { T::zero() } else { T::one() / m };
    let gx = pot.gradient(x);
    let fx = pot.value(x);
    let margins: Vec<T> = eps_list
        .iter()
        .map(|&e| {
            let y = axpy(x, e, h);
            let diff: Vec<T> = x.iter().zip(&y).map(|(a, b)| *a - *b).collect();
            let gdiff: Vec<T> = gx.iter().zip(pot.gradient(&y)).map(|(a, b)| *a - b).collect();
            let df = fx - pot.value(&y);
            // −(X−Y)·(∇F(X)−∇F(Y)) ≤ −R‖X−Y‖² − (F(X)−F(Y))²/m, as RHS − LHS
            (dot(&diff, &gdiff) - r * norm2(&diff) - inv_m * df * df) / (e * e)
        })
        .collect();
    let full = extrapolate_to_zero(eps_list, &margins);
    let partial = extrapolate_to_zero(&eps_list[..eps_list.len() - 1], &margins[..margins.len() - 1]);
    let (d1, d2) = directional_derivatives(pot, x, h, T::zero(), T::c(1e-4));
    let direct = d2 - r * norm2(h) - inv_m * d1 * d1;
    let tol = 1e-4;
    let spread = (full - partial).abs().f64();
    let mut report = CheckReport::new("gradflow-converse", anchor::GRADFLOW_CONVERSE, 0.0, full.f64(), tol)
        .with("R", r)
        .with("m", m)
        .with("direct_margin", direct)
        .with("consistency", (full - direct).abs())
        .with("smallest_eps_margin", margins[margins.len() - 1])
        .with("spread", spread);
    if spread > 10.0 * tol {
        report = report.inconclusive("extrapolation not converged");
    }
    Ok(report)
}
