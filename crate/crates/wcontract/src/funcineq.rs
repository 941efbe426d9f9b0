//! Functional inequalities implied by the contraction estimates: entropy–energy,
//! log-Sobolev, Fisher decay, de Bruijn, entropy creation and HWI-type bounds.

use crate::error::{Error, Result};
use crate::functionals::{fisher, ScalarReport, FISHER_FLOOR};
use crate::grid::{CurvatureParams, GridDensity, GridKind};
use crate::harness::{evi_step, Space};
use crate::report::{anchor, CheckReport};
use crate::scalar::{extrapolate_to_zero, simpson, Real};

fn fisher_info<T: Real>(space: &Space<T>, f: &GridDensity<T>) -> Option<T> {
    fisher(&space.gen, &space.grid, f, T::c(FISHER_FLOOR)).finite()
}

fn require_positive_r<T: Real>(params: &CurvatureParams<T>) -> Result<()> {
    if params.r > T::zero() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("this bound needs R > 0, got R = {}", params.r)))
    }
}

/// `(m/2) log(1 + x/m)`, with its `m = ∞` limit `x/2`.
fn half_m_log1p<T: Real>(m: T, x: T) -> T {
    if m.is_infinite() {
        x / T::c(2.0)
    } else {
        m / T::c(2.0) * (x / m).ln_1p()
    }
}

/// `Ent(f) ≤ (m/2) log(1 + I(f)/(mR))`.
pub fn check_entropy_energy<T: Real>(space: &Space<T>, params: CurvatureParams<T>, f: &GridDensity<T>) -> Result<CheckReport> {
    require_positive_r(&params)?;
    let dx = space.dx().f64();
    let Some(i) = fisher_info(space, f) else {
        return Ok(CheckReport::skipped("entropy-energy", anchor::ENTROPY_ENERGY, "infinite Fisher information"));
    };
    let ent = space.entropy(f);
    let rhs = half_m_log1p(params.m, i / params.r);
    Ok(CheckReport::new("entropy-energy", anchor::ENTROPY_ENERGY, ent.f64(), rhs.f64(), 5.0 * dx)
        .with("R", params.r)
        .with("m", params.m)
        .with("fisher", i)
        .with("u", i * params.inv_m() / params.r))
}

/// `Ent(f) ≤ I(f)/(2R)`.
pub fn check_log_sobolev<T: Real>(space: &Space<T>, params: CurvatureParams<T>, f: &GridDensity<T>) -> Result<CheckReport> {
    require_positive_r(&params)?;
    let Some(i) = fisher_info(space, f) else {
        return Ok(CheckReport::skipped("log-sobolev", anchor::LOG_SOBOLEV, "infinite Fisher information"));
    };
    let ent = space.entropy(f);
    let rhs = i / (T::c(2.0) * params.r);
    Ok(CheckReport::new("log-sobolev", anchor::LOG_SOBOLEV, ent.f64(), rhs.f64(), 5.0 * space.dx().f64())
        .with("R", params.r)
        .with("fisher", i))
}

/// `mR I / (e^{2Rt}(I + mR) − I)`, written as `I / (e^{2Rt} + (I/(mR))(e^{2Rt} − 1))`
/// so that `m = ∞` gives `e^{−2Rt} I`.
pub fn fisher_decay_bound<T: Real>(params: CurvatureParams<T>, i0: T, t: T) -> T {
    let e = (T::c(2.0) * params.r * t).exp();
    let em1 = (T::c(2.0) * params.r * t).exp_m1();
    i0 / (e + i0 * params.inv_m() / params.r * em1)
}

/// Closed-form decay `I(P_t f) ≤ fisher_decay_bound(I(f), t)` at each time.
pub fn check_fisher_decay<T: Real>(
    space: &Space<T>,
    params: CurvatureParams<T>,
    f: &GridDensity<T>,
    times: &[T],
) -> Result<Vec<CheckReport>> {
    require_positive_r(&params)?;
    let dx = space.dx().f64();
    let Some(i0) = fisher_info(space, f) else {
        return Ok(vec![CheckReport::skipped("fisher-decay", anchor::FISHER_DECAY, "infinite Fisher information")]);
    };
    times
        .iter()
        .map(|&t| {
            let ft = space.evolve(f, t)?;
            let it = fisher_info(space, &ft).unwrap_or(T::infinity());
            Ok(CheckReport::new("fisher-decay", anchor::FISHER_DECAY, it.f64(), fisher_decay_bound(params, i0, t).f64(), 5.0 * dx)
                .at(t.f64())
                .with("R", params.r)
                .with("m", params.m)
                .with("fisher0", i0))
        })
        .collect()
}

/// `dI(P_t f)/dt ≤ −2R I − (2/m) I²` by central differences at each `t > 0`.
pub fn check_fisher_differential<T: Real>(
    space: &Space<T>,
    params: CurvatureParams<T>,
    f: &GridDensity<T>,
    times: &[T],
) -> Result<Vec<CheckReport>> {
    let dx = space.dx().f64();
    let info = |t: T| -> Result<T> { Ok(fisher_info(space, &space.evolve(f, t)?).unwrap_or(T::infinity())) };
    times
        .iter()
        .map(|&t| {
            if !(t > T::zero()) {
                return Err(Error::Parameter(format!("differential check needs interior times, got t = {t}")));
            }
            let h = evi_step(t);
            let deriv = (info(t + h)? - info(t - h)?) / (h + h);
            let i = info(t)?;
            let rhs = -T::c(2.0) * params.r * i - T::c(2.0) * params.inv_m() * i * i;
            Ok(CheckReport::new("fisher-differential", anchor::FISHER_DIFFERENTIAL, deriv.f64(), rhs.f64(), 5.0 * dx + 10.0 * h.f64())
                .at(t.f64())
                .with("h", h)
                .with("R", params.r)
                .with("m", params.m))
        })
        .collect()
}

/// Number of dyadic panels `[t/2^{k+1}, t/2^k]` in the de Bruijn quadrature.
pub const DE_BRUIJN_LEVELS: usize = 12;

/// `Ent(f) − Ent(P_t f) = ∫₀ᵗ I(P_s f) ds`; passes when `|residual| ≤ 5dx + 5du`, `du = t/intervals`.
///
/// The integral is composite Simpson with `intervals` steps on each dyadic panel, so the
/// fast initial decay of `I` for peaked data is resolved.
pub fn check_de_bruijn<T: Real>(space: &Space<T>, f: &GridDensity<T>, t: T, intervals: usize) -> Result<CheckReport> {
    if !(t > T::zero()) || intervals < 2 || !intervals.is_multiple_of(2) {
        return Err(Error::Parameter(format!("de Bruijn needs t > 0 and an even interval count, got t = {t}, {intervals}")));
    }
    let k = T::from_usize(intervals).unwrap();
    let mut breaks = vec![T::zero()];
    breaks.extend((0..=DE_BRUIJN_LEVELS).rev().map(|l| t / T::c(2f64.powi(l as i32))));
    let mut integral = T::zero();
    for w in breaks.windows(2) {
        let h = (w[1] - w[0]) / k;
        let times: Vec<T> = (0..=intervals).map(|j| w[0] + h * T::from_usize(j).unwrap()).collect();
        let mut infos = Vec::with_capacity(times.len());
        for v in space.spec.evolve_path(f.values(), &times)? {
            let d = GridDensity::from_evolved(&space.grid, v)?;
            match fisher_info(space, &d) {
                Some(i) => infos.push(i),
                None => return Ok(CheckReport::skipped("de-bruijn", anchor::DE_BRUIJN, "infinite Fisher information")),
            }
        }
        integral += simpson(&infos, h);
    }
    let drop = space.entropy(f) - space.entropy(&space.evolve(f, t)?);
    let du = t / k;
    let tol = 5.0 * space.dx().f64() + 5.0 * du.f64();
    let report = CheckReport::new("de-bruijn", anchor::DE_BRUIJN, drop.f64(), integral.f64(), tol).at(t.f64()).with("du", du);
    let pass = report.margin.abs() <= tol;
    Ok(report.with_verdict(pass))
}

/// `Ent(P_t f) ≤ (m/2) log(1/(1 − e^{−2Rt}))`; `t = 0` and `m = ∞` have an infinite
/// right-hand side and pass trivially.
pub fn check_entropy_creation<T: Real>(
    space: &Space<T>,
    params: CurvatureParams<T>,
    f: &GridDensity<T>,
    times: &[T],
) -> Result<Vec<CheckReport>> {
    require_positive_r(&params)?;
    let tol = 5.0 * space.dx().f64();
    times
        .iter()
        .map(|&t| {
            let ft = space.evolve(f, t)?;
            let ent = space.entropy(&ft);
            let rhs = if t == T::zero() || params.m.is_infinite() {
                T::infinity()
            } else {
                -params.m / T::c(2.0) * (-(T::c(-2.0) * params.r * t).exp_m1()).ln()
            };
            Ok(CheckReport::new("entropy-creation", anchor::ENTROPY_CREATION, ent.f64(), rhs.f64(), tol)
                .at(t.f64())
                .with("R", params.r)
                .with("m", params.m))
        })
        .collect()
}

fn require_flat_circle<T: Real>(space: &Space<T>, m: T) -> Result<()> {
    if space.grid.kind != GridKind::Circle {
        return Err(Error::WrongMethod("HWI check", "circle"));
    }
    if !(m > T::zero()) || m.is_infinite() {
        return Err(Error::Parameter(format!("HWI needs finite m > 0, got {m}")));
    }
    Ok(())
}

/// `sinh²(Ent(f)/(2m)) ≤ W₂(f, 1)√I(f)/(4m)` on a circle with `R = 0`.
pub fn check_hwi<T: Real>(space: &Space<T>, m: T, f: &GridDensity<T>) -> Result<CheckReport> {
    require_flat_circle(space, m)?;
    let Some(i) = fisher_info(space, f) else {
        return Ok(CheckReport::skipped("hwi", anchor::HWI, "infinite Fisher information"));
    };
    let ent = space.entropy(f);
    let w = space.w2(f, &GridDensity::uniform(&space.grid)?)?;
    let s = (ent / (m + m)).sinh();
    let rhs = w * i.sqrt() / (T::c(4.0) * m);
    Ok(CheckReport::new("hwi", anchor::HWI, (s * s).f64(), rhs.f64(), 5.0 * space.dx().f64())
        .with("m", m)
        .with("w2", w)
        .with("fisher", i))
}

/// `x₀ = ½ log(1/(1 − 2·32^{−1/4}))`, beyond which `sinh⁴ x ≥ e^{4x}/32`.
pub fn hwi_threshold() -> f64 {
    0.5 * (1.0 / (1.0 - 2.0 * 32f64.powf(-0.25))).ln()
}

/// The constant `C = 4x₀` obtained by combining the HWI bound with `I(P_t f) ≤ m/(2t)`.
pub fn hwi_default_constant() -> f64 {
    4.0 * hwi_threshold()
}

/// `Ent(P_t f) ≤ (m/2) max{C, log(W₂²(f, 1)/(mt))}` plus the input check
/// `W₂(P_t f, 1) ≤ W₂(f, 1) + 1e−8` (reported with its own row).
pub fn check_hwi_regularization<T: Real>(
    space: &Space<T>,
    m: T,
    f: &GridDensity<T>,
    times: &[T],
    c: f64,
) -> Result<Vec<CheckReport>> {
    require_flat_circle(space, m)?;
    let uniform = GridDensity::uniform(&space.grid)?;
    let w0 = space.w2(f, &uniform)?;
    let tol = 5.0 * space.dx().f64();
    let mut out = Vec::with_capacity(2 * times.len());
    for &t in times {
        if !(t > T::zero()) {
            return Err(Error::Parameter(format!("regularization needs t > 0, got {t}")));
        }
        let ft = space.evolve(f, t)?;
        let ent = space.entropy(&ft);
        let log_term = (w0 * w0 / (m * t)).ln();
        let rhs = m / T::c(2.0) * log_term.max(T::c(c));
        out.push(
            CheckReport::new("hwi-regularization", anchor::HWI_REGULARIZATION, ent.f64(), rhs.f64(), tol)
                .at(t.f64())
                .with("C", c)
                .with("m", m)
                .with("log_regime", log_term > T::c(c)),
        );
        let wt = space.w2(&ft, &uniform)?;
        out.push(
            CheckReport::new("w2-monotonicity", anchor::HWI_REGULARIZATION, wt.f64(), w0.f64(), 1e-8).at(t.f64()),
        );
    }
    Ok(out)
}

/// Smallest `C` for which the regularization bound holds on every `(f, t)`:
/// the largest `2Ent(P_t f)/m` among cases where the log term alone is too small.
pub fn calibrate_hwi_constant<T: Real>(space: &Space<T>, m: T, family: &[GridDensity<T>], times: &[T]) -> Result<f64> {
    require_flat_circle(space, m)?;
    let uniform = GridDensity::uniform(&space.grid)?;
    let mut c = 0.0f64;
    for f in family {
        let w0 = space.w2(f, &uniform)?;
        for &t in times {
            let need = (T::c(2.0) * space.entropy(&space.evolve(f, t)?) / m).f64();
            let log_term = (w0 * w0 / (m * t)).ln().f64();
            if log_term < need {
                c = c.max(need);
            }
        }
    }
    Ok(c)
}

/// `W₂²(P_{t+δ} f, P_t f)/δ² → I(P_t f)` as `δ → 0`, extrapolated over `deltas`
/// (decreasing); inconclusive when successive extrapolants differ by more than `10·tol`.
pub fn check_metric_derivative<T: Real>(space: &Space<T>, f: &GridDensity<T>, t: T, deltas: &[T]) -> Result<CheckReport> {
    if !(t > T::zero()) || deltas.len() < 2 || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("metric derivative needs t > 0 and decreasing deltas".into()));
    }
    let ft = space.evolve(f, t)?;
    let i = match fisher(&space.gen, &space.grid, &ft, T::c(FISHER_FLOOR)) {
        ScalarReport::Finite(v) => v,
        ScalarReport::PlusInfinity => {
            return Ok(CheckReport::skipped("metric-derivative", anchor::METRIC_DERIVATIVE, "infinite Fisher information"))
        }
    };
    let vals: Vec<T> = deltas
        .iter()
        .map(|&d| {
            let w = space.w2(&space.evolve(f, t + d)?, &ft)?;
            Ok(w * w / (d * d))
        })
        .collect::<Result<_>>()?;
    let full = extrapolate_to_zero(deltas, &vals);
    let partial = extrapolate_to_zero(&deltas[..deltas.len() - 1], &vals[..vals.len() - 1]);
    let tol = 5.0 * space.dx().f64() * (1.0 + i.f64());
    let spread = (full - partial).abs().f64();
    let report = CheckReport::new("metric-derivative", anchor::METRIC_DERIVATIVE, full.f64(), i.f64(), tol)
        .at(t.f64())
        .with("spread", spread);
    let pass = report.margin.abs() <= tol;
    let report = report.with_verdict(pass);
    Ok(if spread > 10.0 * tol { report.inconclusive("extrapolation not converged") } else { report })
}
