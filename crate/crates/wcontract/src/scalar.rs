//! Scalar abstraction shared by every numerical routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point type the library is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Eigendecomposition of a symmetric row-major `n × n` matrix.
    ///
    /// Returns `(eigenvalues, vectors)` where `vectors[i * n + k]` is component `i`
    /// of the eigenvector belonging to `eigenvalues[k]`. Order is unspecified.
    fn sym_eigen(n: usize, a: &[Self]) -> (Vec<Self>, Vec<Self>);

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn sym_eigen(n: usize, a: &[Self]) -> (Vec<Self>, Vec<Self>) {
                let m = DMatrix::<$t>::from_row_slice(n, n, a);
                let eig = SymmetricEigen::new(m);
                let mut vecs = vec![0.0; n * n];
                for i in 0..n {
                    for k in 0..n {
                        vecs[i * n + k] = eig.eigenvectors[(i, k)];
                    }
                }
                (eig.eigenvalues.iter().copied().collect(), vecs)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Composite Simpson rule on equally spaced samples (odd count, at least 3).
pub fn simpson<T: Real>(values: &[T], h: T) -> T {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd number of samples");
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { T::c(4.0) * *v } else { T::c(2.0) * *v };
    }
    acc * h / T::c(3.0)
}

/// Polynomial (Neville) extrapolation of samples `(x_i, y_i)` to `x = 0`.
pub fn extrapolate_to_zero<T: Real>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let mut p: Vec<T> = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xa, xb) = (xs[i], xs[i + level]);
            p[i] = (xb * p[i] - xa * p[i + 1]) / (xb - xa);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        let h = 0.25f64;
        let v: Vec<f64> = (0..9).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&v, h) - 2f64.powi(4) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn neville_recovers_quadratic_intercept() {
        let xs = [0.02, 0.01, 0.005];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x + 7.0 * x * x).collect();
        assert!((extrapolate_to_zero(&xs, &ys) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_f32_and_f64_agree() {
        let a = [2.0f64, 1.0, 1.0, 2.0];
        let (mut l, _) = f64::sym_eigen(2, &a);
        l.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (mut l32, _) = f32::sym_eigen(2, &[2.0f32, 1.0, 1.0, 2.0]);
        l32.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((l[0] - 1.0).abs() < 1e-12 && (l[1] - 3.0).abs() < 1e-12);
        assert!((l32[1] - 3.0).abs() < 1e-5);
    }
}
