//! Small dense and tridiagonal kernels used by the implicit schemes.

use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Result, SkgsError};

/// Field over which the tridiagonal kernels run (`f64` or `Complex64`).
pub trait Scalar:
    Copy
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Mul<f64, Output = Self>
{
    fn modulus(self) -> f64;
    fn from_real(x: f64) -> Self;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_real(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal.
/// Complex entries are symmetric, not Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Scalar> SymTridiag<T> {
    pub fn new(diag: Vec<T>, off: Vec<T>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length");
        SymTridiag { diag, off }
    }

    pub fn constant(n: usize, d: T, o: T) -> Self {
        SymTridiag::new(vec![d; n], vec![o; n.saturating_sub(1)])
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::default(); x.len()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        let n = self.diag.len();
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s = s + self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s = s + self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// `self + c * other`, entrywise.
    pub fn axpy(&self, c: T, other: &SymTridiag<T>) -> SymTridiag<T> {
        SymTridiag {
            diag: self.diag.iter().zip(&other.diag).map(|(&a, &b)| a + c * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(&a, &b)| a + c * b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.off)
            .map(|x| x.modulus())
            .fold(0.0, f64::max)
    }

    /// `L D L^T` factorization without pivoting. `dt` is only used to label
    /// the error when a pivot collapses.
    pub fn factor(&self, dt: f64) -> Result<LdlFactor<T>> {
        let n = self.diag.len();
        let scale = self.max_abs();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let di = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - l[i - 1] * self.off[i - 1]
            };
            let m = di.modulus();
            dmin = dmin.min(m);
            dmax = dmax.max(m);
            if !(m > 1e-14 * scale) || !m.is_finite() {
                return Err(SkgsError::SingularSystem {
                    dt,
                    condition: if m > 0.0 { dmax / m } else { f64::INFINITY },
                });
            }
            if i + 1 < n {
                l.push(self.off[i] / di);
            }
            d.push(di);
        }
        Ok(LdlFactor { d, l, condition: dmax / dmin })
    }
}

/// Factor produced by [`SymTridiag::factor`].
#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    d: Vec<T>,
    l: Vec<T>,
    condition: f64,
}

impl<T: Scalar> LdlFactor<T> {
    /// Ratio of largest to smallest pivot modulus.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.d.len();
        for i in 1..n {
            x[i] = x[i] - self.l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] = x[i] / self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] = x[i] - self.l[i] * x[i + 1];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Row-major dense `n x n` matrix-vector product.
pub fn dense_mul(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| dot(&a[i * n..(i + 1) * n], x)).collect()
}
