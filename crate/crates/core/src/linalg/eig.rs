//! Cyclic Jacobi eigensolver for Hermitian matrices.
//!
//! Dimensions stay small (<= 64 for states, a few thousand for
//! superoperator-sized inputs never reach this path), so the quadratic
//! convergence of Jacobi sweeps outweighs any asymptotic concern and the
//! accumulated eigenvectors come out unitary to machine precision.

use num_complex::Complex;

use super::cmatrix::CMatrix;
use crate::scalar::Scalar;

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order and the unitary matrix whose k-th
/// column is the eigenvector of the k-th eigenvalue. The input is symmetrized
/// internally; callers gate on hermiticity beforehand.
pub fn eig_hermitian<S: Scalar>(m: &CMatrix<S>) -> (Vec<S>, CMatrix<S>) {
    assert!(m.is_square(), "eigendecomposition needs a square matrix");
    let n = m.rows();
    let mut a = m.hermitize();
    let mut v = CMatrix::identity(n);

    if n == 1 {
        return (vec![a[(0, 0)].re], v);
    }

    let scale = a.frobenius_norm().max(S::one());
    let tol = scale * S::epsilon();

    for _sweep in 0..100 {
        if off_norm(&a) <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let b = a[(p, q)];
                let babs = b.norm();
                if babs <= tol * S::of(1e-3) {
                    continue;
                }
                // Unitary 2x2 rotation zeroing the (p, q) element: factor the
                // phase of b out, then the classic smallest-angle real Jacobi
                // rotation with tan(2 theta) = 2|b| / (a_qq - a_pp).
                let phase = b / Complex::new(babs, S::zero());
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (S::of(2.0) * babs);
                let t = if tau >= S::zero() {
                    S::one() / (tau + (S::one() + tau * tau).sqrt())
                } else {
                    -S::one() / (-tau + (S::one() + tau * tau).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;

                let cc = Complex::new(c, S::zero());
                let sp = phase * Complex::new(s, S::zero()); // s * e^{i phi}
                let sm = sp.conj(); // s * e^{-i phi}

                // A <- A R
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cc * akp - sm * akq;
                    a[(k, q)] = sp * akp + cc * akq;
                }
                // A <- R^dagger A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cc * apk - sp * aqk;
                    a[(q, k)] = sm * apk + cc * aqk;
                }
                // V <- V R
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cc * vkp - sm * vkq;
                    v[(k, q)] = sp * vkp + cc * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eigs: Vec<S> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| eigs[i].partial_cmp(&eigs[j]).expect("finite eigenvalues"));

    let sorted_eigs: Vec<S> = order.iter().map(|&i| eigs[i]).collect();
    let sorted_v = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (sorted_eigs, sorted_v)
}

fn off_norm<S: Scalar>(a: &CMatrix<S>) -> S {
    let n = a.rows();
    let mut s = S::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s = s + a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}
