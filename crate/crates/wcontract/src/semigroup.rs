//! Heat semigroup `P_t = e^{tL}` via the eigendecomposition of `D^{1/2} L D^{-1/2}`.

use crate::error::{Error, Result};
use crate::grid::{GeneratorMatrix, GridDensity, WeightedGrid};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T> {
    n: usize,
    /// Sorted descending; all `≤ 0` up to roundoff.
    pub eigenvalues: Vec<T>,
    /// Column `k` (entries `q[i*n + k]`) is the `k`-th orthonormal eigenvector
    /// of the symmetrized matrix.
    q: Vec<T>,
    pub sqrt_w: Vec<T>,
}

/// Symmetrizes `L` with the grid weights and diagonalizes it.
pub fn spectral<T: Real>(gen: &GeneratorMatrix<T>, grid: &WeightedGrid<T>) -> Result<SpectralDecomposition<T>> {
    let n = gen.n();
    grid.check_len(&vec![T::zero(); n])?;
    let sqrt_w: Vec<T> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let mut s = vec![T::zero(); n * n];
    let mut scale = T::zero();
    for i in 0..n {
        for j in 0..n {
            let v = sqrt_w[i] * gen.get(i, j) / sqrt_w[j];
            s[i * n + j] = v;
            scale = scale.max(v.abs());
        }
    }
    let tol = T::c(1e-9).max(T::epsilon() * T::c(1e3)) * scale.max(T::one());
    let mut asym = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let d = (s[i * n + j] - s[j * n + i]).abs();
            asym = asym.max(d);
            let avg = (s[i * n + j] + s[j * n + i]) * T::c(0.5);
            s[i * n + j] = avg;
            s[j * n + i] = avg;
        }
    }
    if asym > tol {
        return Err(Error::InconsistentGenerator(asym.f64()));
    }
    let (vals, vecs) = T::sym_eigen(n, &s);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues: Vec<T> = order.iter().map(|&k| vals[k]).collect();
    let mut q = vec![T::zero(); n * n];
    for i in 0..n {
        for (newk, &k) in order.iter().enumerate() {
            q[i * n + newk] = vecs[i * n + k];
        }
    }
    Ok(SpectralDecomposition { n, eigenvalues, q, sqrt_w })
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest nonzero eigenvalue `λ₂ < 0` (the spectral gap is `−λ₂`).
    pub fn lambda2(&self) -> T {
        self.eigenvalues[1]
    }

    /// `max |S − QΛQᵀ|` against the symmetrized generator.
    pub fn reconstruction_error(&self, gen: &GeneratorMatrix<T>) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc += self.q[i * n + k] * self.eigenvalues[k] * self.q[j * n + k];
                }
                let s = self.sqrt_w[i] * gen.get(i, j) / self.sqrt_w[j];
                worst = worst.max((s - acc).abs());
            }
        }
        worst
    }

    /// Coefficients of `D^{1/2} f` in the eigenbasis.
    fn coefficients(&self, f: &[T]) -> Vec<T> {
        let n = self.n;
        let y: Vec<T> = f.iter().zip(&self.sqrt_w).map(|(a, s)| *a * *s).collect();
        let mut c = vec![T::zero(); n];
        for (i, yi) in y.iter().enumerate() {
            let row = &self.q[i * n..(i + 1) * n];
            for (ck, qik) in c.iter_mut().zip(row) {
                *ck += *qik * *yi;
            }
        }
        c
    }

    fn synthesize(&self, c: &[T], t: T) -> Vec<T> {
        let n = self.n;
        let scaled: Vec<T> = c.iter().zip(&self.eigenvalues).map(|(ck, l)| *ck * (*l * t).exp()).collect();
        (0..n)
            .map(|i| {
                let row = &self.q[i * n..(i + 1) * n];
                let z: T = row.iter().zip(&scaled).map(|(a, b)| *a * *b).sum();
                z / self.sqrt_w[i]
            })
            .collect()
    }

    /// `P_t f`.
    pub fn evolve(&self, f: &[T], t: T) -> Result<Vec<T>> {
        if f.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: f.len() });
        }
        if t < T::zero() {
            return Err(Error::NegativeTime(t.f64()));
        }
        if t == T::zero() {
            return Ok(f.to_vec());
        }
        Ok(self.synthesize(&self.coefficients(f), t))
    }

    /// `P_t f` for a sorted list of times, reusing one projection.
    pub fn evolve_path(&self, f: &[T], times: &[T]) -> Result<Vec<Vec<T>>> {
        if f.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: f.len() });
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::UnsortedTimes);
        }
        if let Some(t) = times.iter().find(|t| **t < T::zero()) {
            return Err(Error::NegativeTime(t.f64()));
        }
        let c = self.coefficients(f);
        Ok(times
            .iter()
            .map(|&t| if t == T::zero() { f.to_vec() } else { self.synthesize(&c, t) })
            .collect())
    }

    /// `P_t` on a density, clipping roundoff negatives.
    pub fn evolve_density(&self, grid: &WeightedGrid<T>, f: &GridDensity<T>, t: T) -> Result<GridDensity<T>> {
        if t == T::zero() {
            return Ok(f.clone());
        }
        GridDensity::from_evolved(grid, self.evolve(f.values(), t)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_generator, build_grid, GridKind, Potential};

    #[test]
    fn circulant_spectrum() {
        let g = build_grid::<f64>(GridKind::Circle, 8, (0.0, std::f64::consts::TAU), &Potential::Zero, true).unwrap();
        let l = build_generator(&g).unwrap();
        let s = spectral(&l, &g).unwrap();
        let mut oracle: Vec<f64> = (0..8)
            .map(|k| 2.0 * ((std::f64::consts::TAU * k as f64 / 8.0).cos() - 1.0) / (g.dx * g.dx))
            .collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in s.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(s.eigenvalues[0].abs() < 1e-10 && s.eigenvalues[1] < -1e-3);
        assert!(s.reconstruction_error(&l) < 1e-9);
    }

    #[test]
    fn negative_time_and_unsorted_path() {
        let g = build_grid::<f64>(GridKind::Circle, 16, (0.0, 1.0), &Potential::Zero, true).unwrap();
        let s = spectral(&build_generator(&g).unwrap(), &g).unwrap();
        assert!(matches!(s.evolve(&[1.0; 16], -1.0), Err(Error::NegativeTime(_))));
        assert_eq!(s.evolve_path(&[1.0; 16], &[0.2, 0.1]).unwrap_err(), Error::UnsortedTimes);
    }
}
