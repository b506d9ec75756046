//! States, superoperators, and exact evolution on small Hilbert spaces.
//!
//! Conventions fixed here and used everywhere else:
//!
//! * Qubit basis order is (up, down): `rho[(0, 0)]` is the excited-state
//!   population.
//! * Vectorization is column-stacking, `vec(rho)[i + j*d] = rho[(i, j)]`, so
//!   a sandwich `A rho B` becomes `(B^T kron A) vec(rho)` and the dissipator
//!   `D[c]` maps to `conj(c) kron c - (I kron c^dag c + (c^dag c)^T kron I)/2`.
//! * Hermiticity of constructed states is enforced by symmetrization, which
//!   absorbs the roundoff produced by superoperator application.

use thiserror::Error;

use crate::linalg::{self, CMatrix};
use crate::{c64, C64, CMat};

/// Largest matrix side accepted by [`matrix_exponential`]; covers
/// superoperators of Hilbert dimension up to 64.
pub const MAX_EXP_DIM: usize = 4096;

const HERMITICITY_TOL: f64 = 1e-8;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = -1e-8;
const EIG_HERMITICITY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum QStateError {
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NonHermitian { asymmetry: f64 },
    #[error("trace must equal one (got {trace:.12})")]
    TraceNotOne { trace: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("operation needs dimension {expected}, got {got}")]
    WrongDim { expected: usize, got: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("state has non-positive trace {trace:.3e}")]
    NonPositiveTrace { trace: f64 },
    #[error("Bloch vector length {norm} exceeds one")]
    BlochTooLong { norm: f64 },
}

/// Trace-one positive Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

/// Validates and normalizes a raw matrix into a [`DensityMatrix`].
///
/// The input is symmetrized as `(M + M^dag)/2` before validation; its trace
/// is then divided out exactly, and eigenvalues in `(-1e-8, -1e-10)` from
/// accumulated roundoff are clipped to zero spectrally. Larger violations of
/// hermiticity, unit trace, or positivity are errors.
pub fn make_density_matrix(entries: &CMat) -> Result<DensityMatrix, QStateError> {
    if !entries.is_square() {
        return Err(QStateError::DimensionMismatch {
            context: format!("{}x{} state matrix", entries.rows(), entries.cols()),
        });
    }
    let asymmetry = entries.hermitian_asymmetry();
    if asymmetry > HERMITICITY_TOL {
        return Err(QStateError::NonHermitian { asymmetry });
    }
    let herm = entries.hermitize();
    let trace = herm.trace().re;
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(QStateError::TraceNotOne { trace });
    }
    let normalized = herm.scale_re(1.0 / trace);

    let (eigs, v) = linalg::eig_hermitian(&normalized);
    let min_eigenvalue = eigs[0];
    if min_eigenvalue < POSITIVITY_TOL {
        return Err(QStateError::NotPositive { min_eigenvalue });
    }
    if min_eigenvalue < -1e-10 {
        // Roundoff-level negativity: rebuild from the clipped spectrum.
        let d = normalized.rows();
        let clipped = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                c64(eigs[i].max(0.0), 0.0)
            } else {
                c64(0.0, 0.0)
            }
        });
        let rebuilt = (&(&v * &clipped) * &v.dagger()).hermitize();
        let t = rebuilt.trace().re;
        return Ok(DensityMatrix {
            mat: rebuilt.scale_re(1.0 / t),
        });
    }
    Ok(DensityMatrix { mat: normalized })
}

impl DensityMatrix {
    /// Projector onto a (not necessarily normalized) state vector.
    pub fn pure(psi: &[C64]) -> Result<Self, QStateError> {
        let norm = linalg::vec_norm(psi);
        if norm <= 0.0 {
            return Err(QStateError::NonPositiveTrace { trace: 0.0 });
        }
        let d = psi.len();
        let mat = CMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(DensityMatrix { mat })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            mat: CMatrix::identity(dim).scale_re(1.0 / dim as f64),
        }
    }

    /// Qubit state from the populations/coherence parametrization.
    pub fn qubit(rho_upup: f64, rho_updown: C64) -> Result<Self, QStateError> {
        let m = CMatrix::from_rows(&[
            vec![c64(rho_upup, 0.0), rho_updown],
            vec![rho_updown.conj(), c64(1.0 - rho_upup, 0.0)],
        ]);
        make_density_matrix(&m)
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    /// Excited-state population; qubit states only.
    pub fn rho_upup(&self) -> f64 {
        debug_assert_eq!(self.dim(), 2);
        self.mat[(0, 0)].re
    }

    pub fn rho_downdown(&self) -> f64 {
        debug_assert_eq!(self.dim(), 2);
        self.mat[(1, 1)].re
    }

    pub fn rho_updown(&self) -> C64 {
        debug_assert_eq!(self.dim(), 2);
        self.mat[(0, 1)]
    }
}

/// Hermitian operator with non-negative trace; the trace carries an
/// occurrence probability (or probability density when jumps are involved).
#[derive(Debug, Clone, PartialEq)]
pub struct UnnormalizedState {
    mat: CMat,
}

impl UnnormalizedState {
    /// Symmetrizes and stores. Callers feed in matrices that are Hermitian up
    /// to roundoff; anything worse is a logic error upstream.
    pub fn new(mat: CMat) -> Self {
        assert!(mat.is_square(), "state matrix must be square");
        UnnormalizedState { mat: mat.hermitize() }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        UnnormalizedState { mat: rho.matrix().clone() }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Splits into (normalized state, weight). The weight is the trace.
    pub fn normalize(&self) -> Result<(DensityMatrix, f64), QStateError> {
        let weight = self.trace();
        if weight <= 0.0 {
            return Err(QStateError::NonPositiveTrace { trace: weight });
        }
        let rho = make_density_matrix(&self.mat.scale_re(1.0 / weight))?;
        Ok((rho, weight))
    }
}

/// Linear map on vectorized density matrices, stored as a d^2 x d^2 matrix
/// in the column-stacking convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    mat: CMat,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, mat: CMat) -> Result<Self, QStateError> {
        if mat.rows() != dim * dim || mat.cols() != dim * dim {
            return Err(QStateError::DimensionMismatch {
                context: format!(
                    "superoperator on dimension {dim} needs a {0}x{0} matrix, got {1}x{2}",
                    dim * dim,
                    mat.rows(),
                    mat.cols()
                ),
            });
        }
        Ok(Superoperator { dim, mat })
    }

    pub fn zero(dim: usize) -> Self {
        Superoperator {
            dim,
            mat: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            mat: CMatrix::identity(dim * dim),
        }
    }

    /// The commutator part -i[H, .] of a Lindblad generator.
    pub fn hamiltonian(h: &CMat) -> Self {
        assert!(h.is_square(), "Hamiltonian must be square");
        let d = h.rows();
        let id = CMatrix::identity(d);
        let m = &id.kron(h) - &h.transpose().kron(&id);
        Superoperator {
            dim: d,
            mat: m.scale(c64(0.0, -1.0)),
        }
    }

    /// gamma * D[c] with D[c] rho = c rho c^dag - {c^dag c, rho}/2.
    pub fn dissipator(c: &CMat, gamma: f64) -> Self {
        let jump = Self::jump(c, gamma);
        let drain = Self::jumpless_drain(c, gamma);
        &jump + &drain
    }

    /// The detectable part gamma * (c . c^dag).
    pub fn jump(c: &CMat, gamma: f64) -> Self {
        assert!(c.is_square(), "jump operator must be square");
        Superoperator {
            dim: c.rows(),
            mat: c.conj().kron(c).scale_re(gamma),
        }
    }

    /// The anticommutator drain -gamma {c^dag c, .}/2 that joins the
    /// Hamiltonian part in the jumpless generator.
    pub fn jumpless_drain(c: &CMat, gamma: f64) -> Self {
        let d = c.rows();
        let id = CMatrix::identity(d);
        let cdc = &c.dagger() * c;
        let m = &id.kron(&cdc) + &cdc.transpose().kron(&id);
        Superoperator {
            dim: d,
            mat: m.scale_re(-0.5 * gamma),
        }
    }

    /// Full Lindblad generator -i[H, .] + gamma D[c].
    pub fn lindblad(h: &CMat, c: &CMat, gamma: f64) -> Self {
        &Self::hamiltonian(h) + &Self::dissipator(c, gamma)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn scale(&self, a: f64) -> Self {
        Superoperator {
            dim: self.dim,
            mat: self.mat.scale_re(a),
        }
    }

    /// Raw linear action on a matrix (no symmetrization).
    pub fn apply_matrix(&self, m: &CMat) -> CMat {
        assert_eq!(m.rows(), self.dim, "superoperator dimension mismatch");
        CMatrix::devectorize(&self.mat.matvec(&m.vectorize()), self.dim)
    }

    pub fn apply(&self, state: &UnnormalizedState) -> UnnormalizedState {
        UnnormalizedState::new(self.apply_matrix(state.matrix()))
    }

    /// exp(self * t) as a superoperator.
    pub fn propagator(&self, t: f64) -> Superoperator {
        assert!(t.is_finite(), "propagation time must be finite");
        Superoperator {
            dim: self.dim,
            mat: linalg::expm(&self.mat.scale_re(t)),
        }
    }

    /// Composition: (self o other), acting with `other` first.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        assert_eq!(self.dim, other.dim, "superoperator dimension mismatch");
        Superoperator {
            dim: self.dim,
            mat: &self.mat * &other.mat,
        }
    }
}

impl std::ops::Add for &Superoperator {
    type Output = Superoperator;
    fn add(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        Superoperator {
            dim: self.dim,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl std::ops::Sub for &Superoperator {
    type Output = Superoperator;
    fn sub(self, rhs: &Superoperator) -> Superoperator {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        Superoperator {
            dim: self.dim,
            mat: &self.mat - &rhs.mat,
        }
    }
}

/// Applies exp(generator * t) to a state.
pub fn evolve(
    generator: &Superoperator,
    state: &UnnormalizedState,
    t: f64,
) -> Result<UnnormalizedState, QStateError> {
    if state.dim() != generator.dim() {
        return Err(QStateError::DimensionMismatch {
            context: format!(
                "generator dimension {} vs state dimension {}",
                generator.dim(),
                state.dim()
            ),
        });
    }
    assert!(t.is_finite() && t >= 0.0, "evolution time must be finite and non-negative");
    Ok(generator.propagator(t).apply(state))
}

/// Trace-preserving evolution of a density matrix under a full generator.
pub fn evolve_density(
    generator: &Superoperator,
    rho: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix, QStateError> {
    let out = evolve(generator, &UnnormalizedState::from_density(rho), t)?;
    make_density_matrix(out.matrix())
}

/// exp(M t) for a square matrix with side at most [`MAX_EXP_DIM`].
pub fn matrix_exponential(m: &CMat, t: f64) -> Result<CMat, QStateError> {
    if !m.is_square() {
        return Err(QStateError::DimensionMismatch {
            context: format!("{}x{} matrix exponential", m.rows(), m.cols()),
        });
    }
    if m.rows() > MAX_EXP_DIM {
        return Err(QStateError::DimensionMismatch {
            context: format!("matrix side {} exceeds {MAX_EXP_DIM}", m.rows()),
        });
    }
    Ok(linalg::expm(&m.scale_re(t)))
}

/// Traces out every subsystem not listed in `keep` (indices into `dims`,
/// strictly increasing). Ordering of the kept factors is preserved.
pub fn partial_trace(
    rho: &DensityMatrix,
    dims: &[usize],
    keep: &[usize],
) -> Result<DensityMatrix, QStateError> {
    let joint: usize = dims.iter().product();
    if joint != rho.dim() {
        return Err(QStateError::DimensionMismatch {
            context: format!("subsystem dims product {} vs state dimension {}", joint, rho.dim()),
        });
    }
    if keep.is_empty()
        || keep.windows(2).any(|w| w[0] >= w[1])
        || keep.iter().any(|&k| k >= dims.len())
    {
        return Err(QStateError::DimensionMismatch {
            context: "keep set must be strictly increasing subsystem indices".into(),
        });
    }

    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    let compose = |kept: &[usize], tr: &[usize]| -> usize {
        let mut full = vec![0; dims.len()];
        for (slot, &k) in keep.iter().enumerate() {
            full[k] = kept[slot];
        }
        for (slot, &k) in traced.iter().enumerate() {
            full[k] = tr[slot];
        }
        full.iter().zip(dims).fold(0, |acc, (&d, &dim)| acc * dim + d)
    };
    let unrank = |mut idx: usize, subset: &[usize]| -> Vec<usize> {
        let mut out = vec![0; subset.len()];
        for (slot, &k) in subset.iter().enumerate().rev() {
            out[slot] = idx % dims[k];
            idx /= dims[k];
        }
        out
    };

    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for a in 0..kept_dim {
        let ka = unrank(a, keep);
        for b in 0..kept_dim {
            let kb = unrank(b, keep);
            let mut s = C64::new(0.0, 0.0);
            for m in 0..traced_dim {
                let tm = unrank(m, &traced);
                s += rho.matrix()[(compose(&ka, &tm), compose(&kb, &tm))];
            }
            out[(a, b)] = s;
        }
    }
    make_density_matrix(&out)
}

/// Eigendecomposition restricted to Hermitian input (asymmetry above 1e-10
/// is rejected). Eigenvalues ascend; columns of the returned matrix are the
/// eigenvectors.
pub fn eig_hermitian(m: &CMat) -> Result<(Vec<f64>, CMat), QStateError> {
    if !m.is_square() {
        return Err(QStateError::DimensionMismatch {
            context: format!("{}x{} eigendecomposition", m.rows(), m.cols()),
        });
    }
    let asymmetry = m.hermitian_asymmetry();
    if asymmetry > EIG_HERMITICITY_TOL {
        return Err(QStateError::NonHermitian { asymmetry });
    }
    Ok(linalg::eig_hermitian(m))
}

/// Real 3-vector representation of a qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub n: [f64; 3],
}

impl BlochVector {
    pub fn new(n: [f64; 3]) -> Result<Self, QStateError> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if norm > 1.0 + 1e-12 {
            return Err(QStateError::BlochTooLong { norm });
        }
        Ok(BlochVector { n })
    }

    pub fn norm(&self) -> f64 {
        (self.n[0] * self.n[0] + self.n[1] * self.n[1] + self.n[2] * self.n[2]).sqrt()
    }
}

/// n_k = tr(sigma_k rho) for a qubit state.
pub fn bloch_vector(rho: &DensityMatrix) -> Result<BlochVector, QStateError> {
    if rho.dim() != 2 {
        return Err(QStateError::WrongDim { expected: 2, got: rho.dim() });
    }
    let r01 = rho.entry(0, 1);
    BlochVector::new([
        2.0 * r01.re,
        -2.0 * r01.im,
        rho.entry(0, 0).re - rho.entry(1, 1).re,
    ])
}

/// rho = (I + n . sigma)/2.
pub fn density_from_bloch(n: &BlochVector) -> Result<DensityMatrix, QStateError> {
    let [x, y, z] = n.n;
    let m = CMatrix::from_rows(&[
        vec![c64(0.5 * (1.0 + z), 0.0), c64(0.5 * x, -0.5 * y)],
        vec![c64(0.5 * x, 0.5 * y), c64(0.5 * (1.0 - z), 0.0)],
    ]);
    make_density_matrix(&m)
}

pub fn pauli_x() -> CMat {
    CMatrix::from_rows(&[vec![c64(0., 0.), c64(1., 0.)], vec![c64(1., 0.), c64(0., 0.)]])
}

pub fn pauli_y() -> CMat {
    CMatrix::from_rows(&[vec![c64(0., 0.), c64(0., -1.)], vec![c64(0., 1.), c64(0., 0.)]])
}

pub fn pauli_z() -> CMat {
    CMatrix::from_rows(&[vec![c64(1., 0.), c64(0., 0.)], vec![c64(0., 0.), c64(-1., 0.)]])
}
