//! LU factorization with partial pivoting, used to solve the Pade
//! denominator systems in the matrix exponential.

use num_traits::Zero;

use super::cmatrix::CMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Singular;

/// Solves A X = B for X with partial pivoting. A must be square.
pub fn solve<S: Scalar>(a: &CMatrix<S>, b: &CMatrix<S>) -> Result<CMatrix<S>, Singular> {
    assert!(a.is_square(), "solve needs a square matrix");
    assert_eq!(a.rows(), b.rows(), "solve shape mismatch");
    let n = a.rows();
    let m = b.cols();

    let mut lu = a.clone();
    let mut x = b.clone();
    let mut piv: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let (mut best, mut best_mag) = (k, lu[(k, k)].norm());
        for i in k + 1..n {
            let mag = lu[(i, k)].norm();
            if mag > best_mag {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag == S::zero() {
            return Err(Singular);
        }
        if best != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(best, j)];
                lu[(best, j)] = t;
            }
            piv.swap(k, best);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let sub = factor * lu[(k, j)];
                lu[(i, j)] = lu[(i, j)] - sub;
            }
        }
    }

    // Apply the row permutation to the right-hand side.
    let permuted = CMatrix::from_fn(n, m, |i, j| x[(piv[i], j)]);
    x = permuted;

    // Forward substitution with unit lower triangle.
    for j in 0..m {
        for i in 0..n {
            let mut s = x[(i, j)];
            for k in 0..i {
                s = s - lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s = s - lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn solve_recovers_known_solution() {
        let a = CMatrix::from_fn(5, 5, |i, j| {
            Complex64::new(
                ((3 * i + 7 * j + 1) % 11) as f64 - 5.0,
                ((2 * i + j) % 5) as f64 * 0.3,
            )
        });
        let x_true = CMatrix::from_fn(5, 2, |i, j| Complex64::new(i as f64 + 0.5, j as f64 - 1.0));
        let b = &a * &x_true;
        let x = solve(&a, &b).unwrap();
        assert!((&x - &x_true).max_abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CMatrix::<f64>::zeros(3, 3);
        let b = CMatrix::identity(3);
        assert_eq!(solve(&a, &b), Err(Singular));
    }
}
