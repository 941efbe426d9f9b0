//! Entropy, Fisher information, the `s_r` comparison function and `U_m`.

use crate::error::{Error, Result};
use crate::grid::{GeneratorMatrix, GridDensity, WeightedGrid};
use crate::scalar::Real;

/// A functional value in `(−∞, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarReport<T> {
    Finite(T),
    PlusInfinity,
}

impl<T: Real> ScalarReport<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            ScalarReport::Finite(v) => Some(v),
            ScalarReport::PlusInfinity => None,
        }
    }

    pub fn value(self) -> T {
        match self {
            ScalarReport::Finite(v) => v,
            ScalarReport::PlusInfinity => T::infinity(),
        }
    }
}

/// Below this `|r|` the `r = 0` branch `s_0(x) = x` is used.
pub const S_R_ZERO: f64 = 1e-12;

/// `s_r(x) = sin(√r x)/√r` (r > 0), `x` (r = 0), `sinh(√−r x)/√−r` (r < 0).
pub fn s_r<T: Real>(r: T, x: T) -> Result<T> {
    if x < T::zero() {
        return Err(Error::Parameter(format!("s_r needs x >= 0, got {x}")));
    }
    if r.abs() < T::c(S_R_ZERO) {
        return Ok(x);
    }
    let q = r.abs().sqrt();
    if r > T::zero() {
        if q * x >= T::PI() {
            return Err(Error::OutOfBranch((q * x).f64(), format!("r = {r}, x = {x}")));
        }
        Ok((q * x).sin() / q)
    } else {
        Ok((q * x).sinh() / q)
    }
}

/// `Ent(f) = Σ w_i f_i log f_i` with `0 log 0 = 0`.
pub fn entropy<T: Real>(grid: &WeightedGrid<T>, f: &GridDensity<T>) -> ScalarReport<T> {
    ScalarReport::Finite(entropy_raw(grid, f.values()))
}

pub(crate) fn entropy_raw<T: Real>(grid: &WeightedGrid<T>, f: &[T]) -> T {
    f.iter()
        .zip(&grid.weights)
        .map(|(v, w)| if *v > T::zero() { *w * *v * v.ln() } else { T::zero() })
        .sum()
}

/// Default density floor in the Fisher information.
pub const FISHER_FLOOR: f64 = 1e-12;

/// `I(f) = Σ w_i Γ(f)_i / max(f_i, floor)`; `+∞` when `f` vanishes where it still moves.
pub fn fisher<T: Real>(gen: &GeneratorMatrix<T>, grid: &WeightedGrid<T>, f: &GridDensity<T>, floor: T) -> ScalarReport<T> {
    let g = gen.gamma_sq(f.values()).expect("density has grid length");
    let gtol = T::c(1e-12).max(T::epsilon() * T::c(100.0));
    let mut acc = T::zero();
    for ((gi, fi), w) in g.iter().zip(f.values()).zip(&grid.weights) {
        if *fi < floor && *gi > gtol {
            return ScalarReport::PlusInfinity;
        }
        acc += *w * gi.max(T::zero()) / fi.max(floor);
    }
    ScalarReport::Finite(acc)
}

/// `U_m(f) = exp(−Ent(f)/m)`; zero for infinite entropy, one for `m = ∞`.
pub fn u_m<T: Real>(grid: &WeightedGrid<T>, f: &GridDensity<T>, m: T) -> T {
    match entropy(grid, f) {
        ScalarReport::PlusInfinity => T::zero(),
        ScalarReport::Finite(e) => {
            if m.is_infinite() {
                T::one()
            } else {
                (-e / m).exp()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridKind, Potential};

    #[test]
    fn s_r_branches() {
        assert_eq!(s_r(0.0, 2.0).unwrap(), 2.0);
        assert!((s_r(1.0, std::f64::consts::FRAC_PI_2).unwrap() - 1.0).abs() < 1e-15);
        let series: f64 = (0..12).map(|k| 1.0 / (1..=2 * k + 1).map(|j| j as f64).product::<f64>()).sum();
        assert!((s_r(-1.0, 1.0).unwrap() - series).abs() < 1e-12);
        assert!((s_r(-1.0f64, 1.0).unwrap() - 1.175201).abs() < 1e-6);
        assert!(matches!(s_r(1.0, 3.2), Err(Error::OutOfBranch(..))));
    }

    #[test]
    fn entropy_of_two_atoms() {
        let g = build_grid::<f64>(GridKind::Circle, 8, (0.0, 1.0), &Potential::Zero, true).unwrap();
        let w = g.weights[0];
        let mut v = vec![0.0; 8];
        v[1] = 0.5 / w;
        v[5] = 0.5 / w;
        let f = GridDensity::new(&g, v).unwrap();
        let e = entropy(&g, &f).value();
        assert!((e - (1.0 / (2.0 * w)).ln()).abs() < 1e-14);
        assert!((u_m(&g, &f, 1.0) - 2.0 * w).abs() < 1e-14);
        assert_eq!(u_m(&g, &f, f64::INFINITY), 1.0);
    }
}
