//! Dense complex matrices in row-major order.
//!
//! Everything here is sized for Hilbert-space dimensions up to 64 (so
//! superoperators up to 4096 x 4096). Allocation-free micro-optimisation is
//! deliberately not attempted; clarity and exactness win at these sizes.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct CMatrix<S: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<S>>,
}

impl<S: Scalar> CMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        CMatrix {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<S>) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from nested row slices; all rows must share a length.
    pub fn from_rows(rows: &[Vec<Complex<S>>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        CMatrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex<S>] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        let mut m = self.clone();
        for z in &mut m.data {
            *z = z.conj();
        }
        m
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex<S> {
        assert!(self.is_square(), "trace needs a square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, a: Complex<S>) -> Self {
        let mut m = self.clone();
        for z in &mut m.data {
            *z = *z * a;
        }
        m
    }

    pub fn scale_re(&self, a: S) -> Self {
        self.scale(Complex::new(a, S::zero()))
    }

    pub fn matvec(&self, v: &[Complex<S>]) -> Vec<Complex<S>> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> S {
        self.data
            .iter()
            .map(|z| z.norm())
            .fold(S::zero(), |a, b| a.max(b))
    }

    pub fn frobenius_norm(&self) -> S {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .fold(S::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Maximum absolute column sum; the operator 1-norm.
    pub fn one_norm(&self) -> S {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).fold(S::zero(), |a, b| a + b))
            .fold(S::zero(), |a, b| a.max(b))
    }

    /// max_ij |A_ij - conj(A_ji)|, zero iff Hermitian.
    pub fn hermitian_asymmetry(&self) -> S {
        assert!(self.is_square(), "hermiticity needs a square matrix");
        let mut worst = S::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// (A + A^dagger)/2; absorbs roundoff-level asymmetry.
    pub fn hermitize(&self) -> Self {
        let half = Complex::new(S::of(0.5), S::zero());
        (self + &self.dagger()).scale(half)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (ra, ca, rb, cb) = (self.rows, self.cols, other.rows, other.cols);
        Self::from_fn(ra * rb, ca * cb, |i, j| {
            self[(i / rb, j / cb)] * other[(i % rb, j % cb)]
        })
    }

    /// Column-stacking vectorization: out[i + j*rows] = A[(i, j)].
    pub fn vectorize(&self) -> Vec<Complex<S>> {
        let mut v = vec![Complex::zero(); self.rows * self.cols];
        for j in 0..self.cols {
            for i in 0..self.rows {
                v[i + j * self.rows] = self[(i, j)];
            }
        }
        v
    }

    /// Inverse of [`vectorize`](Self::vectorize) for square matrices.
    pub fn devectorize(v: &[Complex<S>], dim: usize) -> Self {
        assert_eq!(v.len(), dim * dim, "devectorize length mismatch");
        Self::from_fn(dim, dim, |i, j| v[i + j * dim])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<S: Scalar> Index<(usize, usize)> for CMatrix<S> {
    type Output = Complex<S>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<S> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for CMatrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<S> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Scalar> Add for &CMatrix<S> {
    type Output = CMatrix<S>;
    fn add(self, rhs: &CMatrix<S>) -> CMatrix<S> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a = *a + *b;
        }
        out
    }
}

impl<S: Scalar> Sub for &CMatrix<S> {
    type Output = CMatrix<S>;
    fn sub(self, rhs: &CMatrix<S>) -> CMatrix<S> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a = *a - *b;
        }
        out
    }
}

impl<S: Scalar> Neg for &CMatrix<S> {
    type Output = CMatrix<S>;
    fn neg(self) -> CMatrix<S> {
        self.scale(Complex::new(-S::one(), S::zero()))
    }
}

impl<S: Scalar> Mul for &CMatrix<S> {
    type Output = CMatrix<S>;
    fn mul(self, rhs: &CMatrix<S>) -> CMatrix<S> {
        assert_eq!(self.cols, rhs.rows, "mul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + aik * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl<S: Scalar> fmt::Debug for CMatrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "({:?}, {:?})  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Inner product, conjugate-linear in the first argument.
pub fn inner<S: Scalar>(a: &[Complex<S>], b: &[Complex<S>]) -> Complex<S> {
    assert_eq!(a.len(), b.len(), "inner product length mismatch");
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm<S: Scalar>(v: &[Complex<S>]) -> S {
    v.iter()
        .map(|z| z.norm_sqr())
        .fold(S::zero(), |a, b| a + b)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_against_hand_computed_2x2() {
        let a = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(3.0, 0.0), c(4.0, 0.0)]]);
        let b = CMatrix::from_rows(&[vec![c(0.0, 1.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]]);
        let k = a.kron(&b);
        assert_eq!(k.rows(), 4);
        assert_eq!(k[(0, 0)], c(0.0, 1.0));
        assert_eq!(k[(1, 1)], c(1.0, 0.0));
        assert_eq!(k[(0, 2)], c(0.0, 2.0));
        assert_eq!(k[(3, 3)], c(4.0, 0.0));
    }

    #[test]
    fn vectorize_roundtrip_and_kron_identity() {
        // vec(A rho B) = (B^T kron A) vec(rho), the column-stacking identity.
        let a = CMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, (i * j) as f64 * 0.1));
        let b = CMatrix::from_fn(3, 3, |i, j| c((i as f64 - j as f64) * 0.3, 0.7 * j as f64));
        let rho = CMatrix::from_fn(3, 3, |i, j| c(0.1 * (i * 3 + j) as f64, -0.2 * i as f64));

        let lhs = (&(&a * &rho) * &b).vectorize();
        let rhs = b.transpose().kron(&a).matvec(&rho.vectorize());
        for (x, y) in lhs.iter().zip(&rhs) {
            assert!((x - y).norm() < 1e-13);
        }

        let back = CMatrix::devectorize(&rho.vectorize(), 3);
        assert_eq!(back, rho);
    }

    #[test]
    fn hermitize_produces_hermitian() {
        let a = CMatrix::from_fn(4, 4, |i, j| c(i as f64, j as f64));
        let h = a.hermitize();
        assert!(h.hermitian_asymmetry() < 1e-15);
    }
}
