//! Quantum and classical Fisher information.
//!
//! Three QFI routes are provided: the pure-state formula, the spectral
//! formula for mixed states (with an explicit eigenvalue cutoff), and the
//! Bloch-vector formula for qubits. They agree with each other wherever
//! their domains overlap and the tests pin that down. The classical side is
//! [`cfi`] over an [`OutcomeDistribution`], and [`mqt_total`] combines both
//! into the record-plus-conditional-state split produced by monitoring.

use thiserror::Error;

use crate::linalg::{self, inner, vec_norm, CMatrix};
use crate::qstate::{make_density_matrix, BlochVector, DensityMatrix};
use crate::{C64, CMat};

/// Eigenvalues at or below this are treated as exact zeros of the spectrum.
const EIG_ZERO_CUTOFF: f64 = 1e-12;
/// Derivative magnitude allowed inside the zero-eigenvalue subspace before
/// we refuse to compute (the rank of the state is changing with θ).
const ZERO_SUBSPACE_DERIV_TOL: f64 = 1e-8;
/// Probabilities at or below this are treated as zero outcomes.
const PROB_FLOOR: f64 = 1e-15;
/// A zero outcome may carry at most this much derivative.
const PROB_DERIV_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FisherError {
    #[error("state vector has norm {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("derivative inconsistent with the state: {detail}")]
    DerivativeInconsistent { detail: String },
    #[error("unit Bloch vector with radial derivative component {radial:.3e}")]
    InconsistentPureDerivative { radial: f64 },
    #[error(
        "outcome {index} has probability {probability:.3e} but derivative {derivative:.3e}: CFI diverges"
    )]
    SingularOutcome { index: usize, probability: f64, derivative: f64 },
    #[error("invalid outcome distribution: {detail}")]
    BadDistribution { detail: String },
    #[error("shape mismatch: {detail}")]
    Shape { detail: String },
}

/// A state together with its parameter derivative at the same θ.
#[derive(Debug, Clone)]
pub enum ParametrizedState {
    Pure { psi: Vec<C64>, dpsi: Vec<C64> },
    Density { rho: DensityMatrix, drho: CMat },
}

impl ParametrizedState {
    pub fn pure(psi: Vec<C64>, dpsi: Vec<C64>) -> Result<Self, FisherError> {
        if psi.len() != dpsi.len() {
            return Err(FisherError::Shape {
                detail: format!("psi length {} vs dpsi length {}", psi.len(), dpsi.len()),
            });
        }
        let norm = vec_norm(&psi);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(FisherError::NotNormalized { norm });
        }
        Ok(ParametrizedState::Pure { psi, dpsi })
    }

    /// The derivative is symmetrized; asymmetry above 1e-8 or a trace above
    /// 1e-10 is an inconsistency (the trace of the state cannot depend on θ).
    pub fn density(rho: DensityMatrix, drho: CMat) -> Result<Self, FisherError> {
        if drho.rows() != rho.dim() || drho.cols() != rho.dim() {
            return Err(FisherError::Shape {
                detail: format!(
                    "state dimension {} vs derivative {}x{}",
                    rho.dim(),
                    drho.rows(),
                    drho.cols()
                ),
            });
        }
        let asym = drho.hermitian_asymmetry();
        if asym > 1e-8 {
            return Err(FisherError::DerivativeInconsistent {
                detail: format!("derivative asymmetry {asym:.3e}"),
            });
        }
        let herm = drho.hermitize();
        let tr = herm.trace().re;
        if tr.abs() > 1e-10 {
            return Err(FisherError::DerivativeInconsistent {
                detail: format!("derivative trace {tr:.3e}"),
            });
        }
        Ok(ParametrizedState::Density { rho, drho: herm })
    }

    pub fn dim(&self) -> usize {
        match self {
            ParametrizedState::Pure { psi, .. } => psi.len(),
            ParametrizedState::Density { rho, .. } => rho.dim(),
        }
    }

    /// (rho, drho) as plain matrices, expanding projectors for pure states.
    pub fn density_pair(&self) -> (CMat, CMat) {
        match self {
            ParametrizedState::Pure { psi, dpsi } => {
                let rho = outer(psi, psi);
                let drho = &outer(dpsi, psi) + &outer(psi, dpsi);
                (rho, drho)
            }
            ParametrizedState::Density { rho, drho } => (rho.matrix().clone(), drho.clone()),
        }
    }
}

fn outer(a: &[C64], b: &[C64]) -> CMat {
    CMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
}

/// Measurement statistics of a θ-dependent experiment: outcome probabilities
/// (or densities with quadrature weights) and their θ-derivatives.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    probabilities: Vec<f64>,
    derivatives: Vec<f64>,
    /// Quadrature weights when the entries are probability densities;
    /// `None` means a plain discrete distribution.
    weights: Option<Vec<f64>>,
}

impl OutcomeDistribution {
    pub fn discrete(probabilities: Vec<f64>, derivatives: Vec<f64>) -> Result<Self, FisherError> {
        Self::build(probabilities, derivatives, None)
    }

    /// Density entries integrated with caller-supplied quadrature weights.
    pub fn density(
        probabilities: Vec<f64>,
        derivatives: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self, FisherError> {
        Self::build(probabilities, derivatives, Some(weights))
    }

    fn build(
        mut probabilities: Vec<f64>,
        derivatives: Vec<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self, FisherError> {
        if probabilities.len() != derivatives.len() {
            return Err(FisherError::Shape {
                detail: format!(
                    "{} probabilities vs {} derivatives",
                    probabilities.len(),
                    derivatives.len()
                ),
            });
        }
        if let Some(w) = &weights {
            if w.len() != probabilities.len() {
                return Err(FisherError::Shape {
                    detail: format!("{} probabilities vs {} weights", probabilities.len(), w.len()),
                });
            }
            if w.iter().any(|&x| !(x >= 0.0)) {
                return Err(FisherError::BadDistribution {
                    detail: "negative quadrature weight".into(),
                });
            }
        }
        for p in &mut probabilities {
            if *p < 0.0 {
                if *p < -1e-12 {
                    return Err(FisherError::BadDistribution {
                        detail: format!("negative probability {p:.3e}"),
                    });
                }
                *p = 0.0;
            }
        }
        let wgt = |i: usize| weights.as_ref().map_or(1.0, |w| w[i]);
        let mass: f64 = probabilities.iter().enumerate().map(|(i, p)| wgt(i) * p).sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(FisherError::BadDistribution {
                detail: format!("total probability {mass:.12}"),
            });
        }
        let dmass: f64 = derivatives.iter().enumerate().map(|(i, d)| wgt(i) * d).sum();
        if dmass.abs() > 1e-10 {
            return Err(FisherError::BadDistribution {
                detail: format!("derivatives integrate to {dmass:.3e}, expected 0"),
            });
        }
        Ok(OutcomeDistribution { probabilities, derivatives, weights })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }
}

/// Split of the information delivered by a monitored evolution: the
/// classical part carried by the record statistics, the average QFI left in
/// the conditional states, their sum, and for comparison the QFI of the
/// record-averaged state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherBreakdown {
    pub cfi_timings: f64,
    pub avg_traj_qfi: f64,
    pub total: f64,
    pub conventional_qfi: f64,
}

/// QFI of a normalized pure state: 4(⟨dψ|dψ⟩ - |⟨ψ|dψ⟩|²).
pub fn qfi_pure(psi: &[C64], dpsi: &[C64]) -> Result<f64, FisherError> {
    if psi.len() != dpsi.len() {
        return Err(FisherError::Shape {
            detail: format!("psi length {} vs dpsi length {}", psi.len(), dpsi.len()),
        });
    }
    let norm = vec_norm(psi);
    if (norm - 1.0).abs() > 1e-10 {
        return Err(FisherError::NotNormalized { norm });
    }
    let dd = inner(dpsi, dpsi).re;
    let sd = inner(psi, dpsi);
    Ok((4.0 * (dd - sd.norm_sqr())).max(0.0))
}

/// QFI of a mixed state via the spectral formula
/// sum over p_m + p_n > 0 of 2|⟨m|drho|n⟩|² / (p_m + p_n).
///
/// Eigenvalues at or below 1e-12 count as zero. A derivative living inside
/// the zero-eigenvalue subspace means the rank of the state changes with θ;
/// that is reported as an error rather than silently truncated.
pub fn qfi_mixed(state: &ParametrizedState) -> Result<f64, FisherError> {
    match state {
        ParametrizedState::Pure { psi, dpsi } => qfi_pure(psi, dpsi),
        ParametrizedState::Density { rho, drho } => {
            let (p, d_eig) = eigenbasis_derivative(rho, drho)?;
            let d = p.len();
            let mut f = 0.0;
            for m in 0..d {
                for n in 0..d {
                    let denom = p[m].max(0.0) + p[n].max(0.0);
                    if denom > EIG_ZERO_CUTOFF {
                        f += 2.0 * d_eig[(m, n)].norm_sqr() / denom;
                    }
                }
            }
            Ok(f)
        }
    }
}

/// Diagonalizes the state and expresses the derivative in its eigenbasis,
/// checking that the zero-eigenvalue block carries no derivative.
fn eigenbasis_derivative(
    rho: &DensityMatrix,
    drho: &CMat,
) -> Result<(Vec<f64>, CMat), FisherError> {
    let (p, v) = linalg::eig_hermitian(rho.matrix());
    let d_eig = &(&v.dagger() * drho) * &v;
    let d = p.len();
    for m in 0..d {
        if p[m] > EIG_ZERO_CUTOFF {
            continue;
        }
        for n in 0..d {
            if p[n] <= EIG_ZERO_CUTOFF && d_eig[(m, n)].norm() > ZERO_SUBSPACE_DERIV_TOL {
                return Err(FisherError::DerivativeInconsistent {
                    detail: format!(
                        "zero-eigenvalue subspace carries derivative {:.3e} at ({m}, {n}); \
                         the state rank changes with the parameter",
                        d_eig[(m, n)].norm()
                    ),
                });
            }
        }
    }
    Ok((p, d_eig))
}

/// Qubit QFI from the Bloch vector: |dn|² + (n·dn)²/(1-|n|²), the second
/// term absent on the sphere surface. A unit-length n with a radial
/// derivative has no valid state family behind it and is rejected.
pub fn qfi_qubit_bloch(n: &BlochVector, dn: [f64; 3]) -> Result<f64, FisherError> {
    let r2: f64 = n.n.iter().map(|x| x * x).sum();
    let nd: f64 = n.n.iter().zip(&dn).map(|(a, b)| a * b).sum();
    let dd: f64 = dn.iter().map(|x| x * x).sum();
    if 1.0 - r2 < 1e-12 {
        if nd.abs() >= 1e-6 {
            return Err(FisherError::InconsistentPureDerivative { radial: nd });
        }
        Ok(dd)
    } else {
        Ok(dd + nd * nd / (1.0 - r2))
    }
}

/// Symmetric logarithmic derivative: the Hermitian L solving
/// drho = (L rho + rho L)/2, built entrywise in the eigenbasis of rho with
/// entries on the doubly-zero subspace set to 0. For a pure state this
/// reduces to L = 2 drho.
pub fn sld(state: &ParametrizedState) -> Result<CMat, FisherError> {
    match state {
        ParametrizedState::Pure { psi, dpsi } => {
            let norm = vec_norm(psi);
            if (norm - 1.0).abs() > 1e-10 {
                return Err(FisherError::NotNormalized { norm });
            }
            let drho = &outer(dpsi, psi) + &outer(psi, dpsi);
            Ok(drho.scale_re(2.0))
        }
        ParametrizedState::Density { rho, drho } => {
            let (p, v) = linalg::eig_hermitian(rho.matrix());
            let d_eig = &(&v.dagger() * drho) * &v;
            let d = p.len();
            // Same rank-change guard as the QFI path.
            for m in 0..d {
                if p[m] > EIG_ZERO_CUTOFF {
                    continue;
                }
                for n in 0..d {
                    if p[n] <= EIG_ZERO_CUTOFF && d_eig[(m, n)].norm() > ZERO_SUBSPACE_DERIV_TOL {
                        return Err(FisherError::DerivativeInconsistent {
                            detail: format!(
                                "zero-eigenvalue subspace carries derivative {:.3e} at ({m}, {n})",
                                d_eig[(m, n)].norm()
                            ),
                        });
                    }
                }
            }
            let l_eig = CMatrix::from_fn(d, d, |m, n| {
                let denom = p[m].max(0.0) + p[n].max(0.0);
                if denom > EIG_ZERO_CUTOFF {
                    d_eig[(m, n)] * (2.0 / denom)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            Ok((&(&v * &l_eig) * &v.dagger()).hermitize())
        }
    }
}

/// Classical Fisher information sum of (dP)²/P, quadrature-weighted when the
/// distribution holds densities. A zero-probability outcome with nonzero
/// derivative makes the CFI divergent and is reported as an error.
pub fn cfi(dist: &OutcomeDistribution) -> Result<f64, FisherError> {
    let mut f = 0.0;
    for i in 0..dist.probabilities.len() {
        let w = dist.weights.as_ref().map_or(1.0, |w| w[i]);
        let p = dist.probabilities[i];
        let dp = dist.derivatives[i];
        if p > PROB_FLOOR {
            f += w * dp * dp / p;
        } else if dp.abs() > PROB_DERIV_TOL {
            return Err(FisherError::SingularOutcome {
                index: i,
                probability: p,
                derivative: dp,
            });
        }
    }
    Ok(f)
}

/// Information split for a trajectory ensemble: classical CFI of the record
/// weights, plus the weighted average of the conditional-state QFIs, plus
/// the benchmark QFI of the weight-averaged state (with product-rule total
/// derivative).
pub fn mqt_total(
    ensemble: &[(f64, ParametrizedState)],
    weight_derivatives: &[f64],
) -> Result<FisherBreakdown, FisherError> {
    if ensemble.is_empty() {
        return Err(FisherError::Shape { detail: "empty trajectory ensemble".into() });
    }
    if ensemble.len() != weight_derivatives.len() {
        return Err(FisherError::Shape {
            detail: format!(
                "{} trajectories vs {} weight derivatives",
                ensemble.len(),
                weight_derivatives.len()
            ),
        });
    }
    let d = ensemble[0].1.dim();
    if ensemble.iter().any(|(_, s)| s.dim() != d) {
        return Err(FisherError::Shape { detail: "mixed state dimensions in ensemble".into() });
    }

    let weights: Vec<f64> = ensemble.iter().map(|(w, _)| *w).collect();
    let dist = OutcomeDistribution::discrete(weights, weight_derivatives.to_vec())?;
    let cfi_timings = cfi(&dist)?;

    let mut avg_traj_qfi = 0.0;
    let mut rho_bar = CMatrix::zeros(d, d);
    let mut drho_bar = CMatrix::zeros(d, d);
    for ((w, state), dw) in ensemble.iter().zip(weight_derivatives) {
        let (rho_l, drho_l) = state.density_pair();
        rho_bar = &rho_bar + &rho_l.scale_re(*w);
        drho_bar = &(&drho_bar + &rho_l.scale_re(*dw)) + &drho_l.scale_re(*w);
        if *w > PROB_FLOOR {
            avg_traj_qfi += w * qfi_mixed(state)?;
        }
    }

    let rho_bar = make_density_matrix(&rho_bar).map_err(|e| FisherError::BadDistribution {
        detail: format!("weight-averaged state invalid: {e}"),
    })?;
    let conventional_qfi = qfi_mixed(&ParametrizedState::density(rho_bar, drho_bar)?)?;

    Ok(FisherBreakdown {
        cfi_timings,
        avg_traj_qfi,
        total: cfi_timings + avg_traj_qfi,
        conventional_qfi,
    })
}

/// Central-difference step balancing truncation against roundoff.
pub fn fd_default_step(theta: f64) -> f64 {
    f64::EPSILON.powf(1.0 / 3.0) * theta.abs().max(1.0)
}

/// Central difference (f(θ+h) - f(θ-h)) / 2h for scalar-valued f.
pub fn finite_difference_scalar(f: impl Fn(f64) -> f64, theta: f64, h: Option<f64>) -> f64 {
    let h = h.unwrap_or_else(|| fd_default_step(theta));
    (f(theta + h) - f(theta - h)) / (2.0 * h)
}

/// Central difference for matrix-valued f.
pub fn finite_difference_matrix(f: impl Fn(f64) -> CMat, theta: f64, h: Option<f64>) -> CMat {
    let h = h.unwrap_or_else(|| fd_default_step(theta));
    (&f(theta + h) - &f(theta - h)).scale_re(1.0 / (2.0 * h))
}
