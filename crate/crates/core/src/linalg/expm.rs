//! Matrix exponential.
//!
//! Hermitian and skew-Hermitian inputs go through the exact spectral route
//! (the generators built downstream are often of this kind, and the spectral
//! path keeps unitarity to machine precision). Everything else uses Pade
//! scaling-and-squaring with the degree-13 approximant and the standard
//! order-selection thresholds.

use num_complex::Complex;
use num_traits::Zero;

use super::cmatrix::CMatrix;
use super::eig::eig_hermitian;
use super::lu;
use crate::scalar::Scalar;

const PADE3: [f64; 4] = [120., 60., 12., 1.];
const PADE5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const PADE7: [f64; 8] = [17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.];
const PADE9: [f64; 10] = [
    17643225600.,
    8821612800.,
    2075673600.,
    302702400.,
    30270240.,
    2162160.,
    110880.,
    3960.,
    90.,
    1.,
];
const PADE13: [f64; 14] = [
    64764752532480000.,
    32382376266240000.,
    7771770303897600.,
    1187353796428800.,
    129060195264000.,
    10559470521600.,
    670442572800.,
    33522128640.,
    1323241920.,
    40840800.,
    960960.,
    16380.,
    182.,
    1.,
];

const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

pub fn expm<S: Scalar>(a: &CMatrix<S>) -> CMatrix<S> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.rows();
    let scale = a.max_abs().max(S::one());
    let spectral_tol = scale * S::of(1e-13);

    if a.hermitian_asymmetry() <= spectral_tol {
        return expm_hermitian(a, false);
    }
    if skew_asymmetry(a) <= spectral_tol {
        return expm_hermitian(&a.scale(Complex::new(S::zero(), -S::one())), true);
    }

    let norm = a.one_norm().to_f64().expect("finite norm");
    if norm == 0.0 {
        return CMatrix::identity(n);
    }

    if norm <= THETA3 {
        return pade_low(a, &PADE3);
    }
    if norm <= THETA5 {
        return pade_low(a, &PADE5);
    }
    if norm <= THETA7 {
        return pade_low(a, &PADE7);
    }
    if norm <= THETA9 {
        return pade_low(a, &PADE9);
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale_re(S::of(0.5f64.powi(squarings as i32)));
    let mut f = pade13(&scaled);
    for _ in 0..squarings {
        f = &f * &f;
    }
    f
}

/// Spectral exponential. With `rotate` set the input is H from A = iH and
/// the result is exp(iH).
fn expm_hermitian<S: Scalar>(h: &CMatrix<S>, rotate: bool) -> CMatrix<S> {
    let n = h.rows();
    let (eigs, v) = eig_hermitian(h);
    let d = CMatrix::from_fn(n, n, |i, j| {
        if i != j {
            return Complex::zero();
        }
        if rotate {
            Complex::new(eigs[i].cos(), eigs[i].sin())
        } else {
            Complex::new(eigs[i].exp(), S::zero())
        }
    });
    &(&v * &d) * &v.dagger()
}

fn skew_asymmetry<S: Scalar>(a: &CMatrix<S>) -> S {
    let n = a.rows();
    let mut worst = S::zero();
    for i in 0..n {
        for j in 0..n {
            let d = (a[(i, j)] + a[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Degree 3/5/7/9 approximant: U = A * sum b_{2k+1} A^{2k}, V = sum b_{2k} A^{2k}.
fn pade_low<S: Scalar>(a: &CMatrix<S>, b: &[f64]) -> CMatrix<S> {
    let n = a.rows();
    let mut even_powers = vec![CMatrix::identity(n)];
    let a2 = a * a;
    let half_terms = b.len() / 2;
    for _ in 1..half_terms {
        let next = &even_powers[even_powers.len() - 1] * &a2;
        even_powers.push(next);
    }

    let mut u_sum = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for (k, p) in even_powers.iter().enumerate() {
        u_sum = &u_sum + &p.scale_re(S::of(b[2 * k + 1]));
        v = &v + &p.scale_re(S::of(b[2 * k]));
    }
    let u = a * &u_sum;
    pade_solve(&u, &v)
}

fn pade13<S: Scalar>(a: &CMatrix<S>) -> CMatrix<S> {
    let n = a.rows();
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_hi = &(&a6.scale_re(S::of(b[13])) + &a4.scale_re(S::of(b[11]))) + &a2.scale_re(S::of(b[9]));
    let u_lo = &(&(&a6.scale_re(S::of(b[7])) + &a4.scale_re(S::of(b[5]))) + &a2.scale_re(S::of(b[3])))
        + &CMatrix::identity(n).scale_re(S::of(b[1]));
    let u = a * &(&(&a6 * &u_hi) + &u_lo);

    let v_hi = &(&a6.scale_re(S::of(b[12])) + &a4.scale_re(S::of(b[10]))) + &a2.scale_re(S::of(b[8]));
    let v = &(&a6 * &v_hi)
        + &(&(&(&a6.scale_re(S::of(b[6])) + &a4.scale_re(S::of(b[4]))) + &a2.scale_re(S::of(b[2])))
            + &CMatrix::identity(n).scale_re(S::of(b[0])));

    pade_solve(&u, &v)
}

fn pade_solve<S: Scalar>(u: &CMatrix<S>, v: &CMatrix<S>) -> CMatrix<S> {
    let denominator = v - u;
    let numerator = v + u;
    lu::solve(&denominator, &numerator).expect("Pade denominator is nonsingular by construction")
}
