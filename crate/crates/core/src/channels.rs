//! Closed-form physics of the three monitored qubit decoherence channels.
//!
//! Each channel is H = omega S_z plus a single jump operator c at rate
//! gamma: relaxation (c = S_-), spin flip (c = S_x), dephasing (c = S_z).
//! This module carries the exact trajectory states, the non-selective
//! states, the information-per-cycle table, and the optimized extraction
//! rates. Everything here is closed-form; the superoperator and Monte Carlo
//! modules exist to check these expressions, not the other way around.

use thiserror::Error;

use crate::fisher::{self, FisherError};
use crate::linalg::CMatrix;
use crate::qstate::{
    make_density_matrix, BlochVector, DensityMatrix, Superoperator, UnnormalizedState,
};
use crate::{c64, C64, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Relaxation,
    SpinFlip,
    Dephasing,
}

impl ChannelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelKind::Relaxation => "relaxation",
            ChannelKind::SpinFlip => "spin_flip",
            ChannelKind::Dephasing => "dephasing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Omega,
    Gamma,
}

impl Parameter {
    pub fn label(&self) -> &'static str {
        match self {
            Parameter::Omega => "omega",
            Parameter::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMethod {
    Mqt,
    Conventional,
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("gamma must be finite and non-negative, got {0}")]
    BadGamma(f64),
    #[error("omega must be finite, got {0}")]
    BadOmega(f64),
    #[error("jump times must be strictly increasing within [0, {horizon}]")]
    BadJumpTimes { horizon: f64 },
    #[error("relaxation admits at most one jump per cycle, got {0}")]
    TooManyJumps(usize),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("information calculation failed: {0}")]
    Fisher(#[from] FisherError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub omega: f64,
    pub gamma: f64,
}

impl ChannelSpec {
    pub fn new(kind: ChannelKind, omega: f64, gamma: f64) -> Result<Self, ChannelError> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(ChannelError::BadGamma(gamma));
        }
        if !omega.is_finite() {
            return Err(ChannelError::BadOmega(omega));
        }
        Ok(ChannelSpec { kind, omega, gamma })
    }

    /// The jump operator c of the channel.
    pub fn jump_operator(&self) -> CMat {
        match self.kind {
            // S_- = |down><up|
            ChannelKind::Relaxation => CMatrix::from_rows(&[
                vec![c64(0.0, 0.0), c64(0.0, 0.0)],
                vec![c64(1.0, 0.0), c64(0.0, 0.0)],
            ]),
            ChannelKind::SpinFlip => crate::qstate::pauli_x().scale_re(0.5),
            ChannelKind::Dephasing => crate::qstate::pauli_z().scale_re(0.5),
        }
    }

    pub fn hamiltonian(&self) -> CMat {
        crate::qstate::pauli_z().scale_re(0.5 * self.omega)
    }
}

/// Ordered jump record over one measurement cycle of duration `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTimes {
    times: Vec<f64>,
    horizon: f64,
}

impl JumpTimes {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self, ChannelError> {
        let ordered = times.windows(2).all(|w| w[0] < w[1]);
        let bounded = times.iter().all(|&t| t.is_finite() && (0.0..=horizon).contains(&t));
        if !(horizon.is_finite() && horizon >= 0.0 && ordered && bounded) {
            return Err(ChannelError::BadJumpTimes { horizon });
        }
        Ok(JumpTimes { times, horizon })
    }

    pub fn none(horizon: f64) -> Self {
        JumpTimes { times: Vec::new(), horizon }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn count(&self) -> usize {
        self.times.len()
    }
}

/// Net phase-accumulation time: the integral of the sign function that
/// starts at +1 and flips at every jump.
pub fn net_phase_time(jumps: &JumpTimes) -> f64 {
    let n = jumps.count();
    let mut phi = if n % 2 == 0 { jumps.horizon() } else { -jumps.horizon() };
    let mut sign = 2.0;
    for &t in jumps.times() {
        phi += sign * t;
        sign = -sign;
    }
    phi
}

/// (full generator, jump part, jumpless part); full = jumpless + jump.
pub fn generators(spec: &ChannelSpec) -> (Superoperator, Superoperator, Superoperator) {
    let c = spec.jump_operator();
    let h = spec.hamiltonian();
    let jump = Superoperator::jump(&c, spec.gamma);
    let jumpless =
        &Superoperator::hamiltonian(&h) + &Superoperator::jumpless_drain(&c, spec.gamma);
    let full = &jumpless + &jump;
    (full, jump, jumpless)
}

/// Trajectory with zero detected jumps over [0, T]; trace = occurrence
/// probability.
pub fn jumpless_state(spec: &ChannelSpec, rho0: &DensityMatrix, t: f64) -> UnnormalizedState {
    assert!(t >= 0.0 && t.is_finite(), "horizon must be finite and non-negative");
    let (ruu, rdd, rud) = qubit_entries(rho0);
    let phase = c64(0.0, -spec.omega * t).exp();
    let m = match spec.kind {
        ChannelKind::Relaxation => {
            let u = (-spec.gamma * t).exp();
            let off = phase * rud * u.sqrt();
            CMatrix::from_rows(&[
                vec![c64(u * ruu, 0.0), off],
                vec![off.conj(), c64(rdd, 0.0)],
            ])
        }
        ChannelKind::SpinFlip | ChannelKind::Dephasing => {
            let p0 = (-spec.gamma * t / 4.0).exp();
            let off = phase * rud;
            CMatrix::from_rows(&[
                vec![c64(ruu, 0.0), off],
                vec![off.conj(), c64(rdd, 0.0)],
            ])
            .scale_re(p0)
        }
    };
    UnnormalizedState::new(m)
}

/// Trajectory with the given detected jump record; trace = occurrence
/// probability density in the jump times.
pub fn jump_trajectory_state(
    spec: &ChannelSpec,
    rho0: &DensityMatrix,
    jumps: &JumpTimes,
) -> Result<UnnormalizedState, ChannelError> {
    let n = jumps.count();
    if n == 0 {
        return Ok(jumpless_state(spec, rho0, jumps.horizon()));
    }
    let (ruu, rdd, rud) = qubit_entries(rho0);
    let t = jumps.horizon();
    let m = match spec.kind {
        ChannelKind::Relaxation => {
            if n >= 2 {
                return Err(ChannelError::TooManyJumps(n));
            }
            // One decay resets to the ground state; nothing evolves after.
            let w = spec.gamma * (-spec.gamma * jumps.times()[0]).exp() * ruu;
            CMatrix::from_rows(&[
                vec![c64(0.0, 0.0), c64(0.0, 0.0)],
                vec![c64(0.0, 0.0), c64(w, 0.0)],
            ])
        }
        ChannelKind::SpinFlip => {
            let amp = (spec.gamma / 4.0).powi(n as i32) * (-spec.gamma * t / 4.0).exp();
            let phi = net_phase_time(jumps);
            let rot = c64(0.0, -spec.omega * phi).exp();
            if n % 2 == 0 {
                let off = rot * rud;
                CMatrix::from_rows(&[
                    vec![c64(ruu, 0.0), off],
                    vec![off.conj(), c64(rdd, 0.0)],
                ])
                .scale_re(amp)
            } else {
                // Odd jump count conjugates the even-count state by sigma_x.
                let off = (rot * rud).conj();
                CMatrix::from_rows(&[
                    vec![c64(rdd, 0.0), off],
                    vec![off.conj(), c64(ruu, 0.0)],
                ])
                .scale_re(amp)
            }
        }
        ChannelKind::Dephasing => {
            let amp = (spec.gamma / 4.0).powi(n as i32) * (-spec.gamma * t / 4.0).exp();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let off = c64(0.0, -spec.omega * t).exp() * rud * sign;
            CMatrix::from_rows(&[
                vec![c64(ruu, 0.0), off],
                vec![off.conj(), c64(rdd, 0.0)],
            ])
            .scale_re(amp)
        }
    };
    Ok(UnnormalizedState::new(m))
}

/// Trajectory-averaged (non-selective) state after time T.
pub fn nonselective_state(spec: &ChannelSpec, rho0: &DensityMatrix, t: f64) -> DensityMatrix {
    assert!(t >= 0.0 && t.is_finite(), "horizon must be finite and non-negative");
    let (ruu, rdd, rud) = qubit_entries(rho0);
    let m = match spec.kind {
        ChannelKind::Relaxation => {
            let u = (-spec.gamma * t).exp();
            let off = c64(0.0, -spec.omega * t).exp() * rud * u.sqrt();
            CMatrix::from_rows(&[
                vec![c64(u * ruu, 0.0), off],
                vec![off.conj(), c64(1.0 - u * ruu, 0.0)],
            ])
        }
        ChannelKind::SpinFlip => {
            let (f, g) = flip_f_g(spec.omega, spec.gamma, t);
            let off = (f * rud + g * rud.conj()) * (-spec.gamma * t / 4.0).exp();
            let dz = 0.5 * (-spec.gamma * t / 2.0).exp() * (ruu - rdd);
            CMatrix::from_rows(&[
                vec![c64(0.5 + dz, 0.0), off],
                vec![off.conj(), c64(0.5 - dz, 0.0)],
            ])
        }
        ChannelKind::Dephasing => {
            let off = c64(0.0, -spec.omega * t).exp() * rud * (-spec.gamma * t / 2.0).exp();
            CMatrix::from_rows(&[
                vec![c64(ruu, 0.0), off],
                vec![off.conj(), c64(rdd, 0.0)],
            ])
        }
    };
    make_density_matrix(&m).expect("closed-form ensemble state is a valid density matrix")
}

/// cos(wT) and sin(wT)/w as analytic functions of w2 = w^2, continued
/// through w2 <= 0 (trigonometric turns hyperbolic below the boundary).
pub(crate) fn cos_sinc(w2: f64, t: f64) -> (f64, f64) {
    let x = w2 * t * t;
    if x.abs() < 1e-6 {
        // Series in x keeps full accuracy through the branch point.
        let c = 1.0 - x / 2.0 + x * x / 24.0 - x * x * x / 720.0;
        let s = t * (1.0 - x / 6.0 + x * x / 120.0 - x * x * x / 5040.0);
        (c, s)
    } else if w2 > 0.0 {
        let w = w2.sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        let w = (-w2).sqrt();
        ((w * t).cosh(), (w * t).sinh() / w)
    }
}

/// d/d(w2) of [cos(wT), sin(wT)/w].
pub(crate) fn cos_sinc_dw2(w2: f64, t: f64) -> (f64, f64) {
    let (c, s) = cos_sinc(w2, t);
    let dc = -0.5 * t * s;
    let x = w2 * t * t;
    let ds = if x.abs() < 1e-6 {
        t * t * t * (-1.0 / 6.0 + x / 60.0 - x * x / 2520.0)
    } else {
        (t * c - s) / (2.0 * w2)
    };
    (dc, ds)
}

/// The coherence-mixing coefficients of the spin-flip ensemble state:
/// f = cos(wT) - i (omega/w) sin(wT), g = gamma sin(wT)/(4w),
/// with w^2 = omega^2 - (gamma/4)^2 continued complex-safely.
pub(crate) fn flip_f_g(omega: f64, gamma: f64, t: f64) -> (C64, f64) {
    let w2 = omega * omega - gamma * gamma / 16.0;
    let (c, s) = cos_sinc(w2, t);
    (c64(c, -omega * s), gamma / 4.0 * s)
}

fn qubit_entries(rho: &DensityMatrix) -> (f64, f64, C64) {
    assert_eq!(rho.dim(), 2, "channel states are qubits");
    (rho.rho_upup(), rho.rho_downdown(), rho.rho_updown())
}

/// One row of the per-cycle information table.
///
/// `jump_traj_qfi` is the QFI of a representative jump trajectory: the
/// shared constant where trajectories are timing-independent, otherwise a
/// single jump at T/2. `conventional_qfi` is the exact QFI of the
/// non-selective state (for the spin-flip frequency row this differs from
/// the leading-order closed form beyond small gamma/omega; see `caveats`).
#[derive(Debug, Clone, PartialEq)]
pub struct InfoTableRow {
    pub kind: ChannelKind,
    pub parameter: Parameter,
    pub jumpless_qfi: f64,
    pub jump_traj_qfi: f64,
    pub cfi_timings: f64,
    pub avg_traj_qfi: f64,
    pub total: f64,
    pub conventional_qfi: f64,
    /// Empty when every entry is exact and inside its stated regime.
    pub caveats: Vec<String>,
}

impl InfoTableRow {
    pub fn is_valid(&self) -> bool {
        self.caveats.is_empty()
    }
}

/// Evaluates the information-per-cycle table row for one channel, parameter,
/// initial state, and horizon.
pub fn table1_row(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<InfoTableRow, ChannelError> {
    assert!(t >= 0.0 && t.is_finite(), "horizon must be finite and non-negative");
    let (ruu, rdd, rud) = qubit_entries(rho0);
    let r2 = rud.norm_sqr();
    let gamma = spec.gamma;
    let u = (-gamma * t).exp();
    let mut caveats = Vec::new();

    let row = match (parameter, spec.kind) {
        (Parameter::Omega, ChannelKind::Relaxation) => {
            let p0 = ruu * u + rdd;
            let avg = 4.0 * t * t * r2 * u / p0;
            InfoTableRow {
                kind: spec.kind,
                parameter,
                jumpless_qfi: 4.0 * t * t * r2 * u / (p0 * p0),
                jump_traj_qfi: 0.0,
                cfi_timings: 0.0,
                avg_traj_qfi: avg,
                total: avg,
                conventional_qfi: 4.0 * t * t * r2 * u,
                caveats: Vec::new(),
            }
        }
        (Parameter::Omega, ChannelKind::SpinFlip) => {
            if spec.omega <= 0.0 || gamma / spec.omega > 0.01 {
                caveats.push(
                    "spin-flip ensemble frequency QFI: leading-order form needs gamma/omega <= 0.01; \
                     the exact value is reported"
                        .into(),
                );
            }
            // Midpoint jump has zero net phase time, hence zero QFI.
            let total = flip_total_omega(gamma, t, r2);
            InfoTableRow {
                kind: spec.kind,
                parameter,
                jumpless_qfi: 4.0 * t * t * r2,
                jump_traj_qfi: 0.0,
                cfi_timings: 0.0,
                avg_traj_qfi: total,
                total,
                conventional_qfi: flip_conventional_qfi_omega(spec, rho0, t)?,
                caveats,
            }
        }
        (Parameter::Omega, ChannelKind::Dephasing) => {
            let val = 4.0 * t * t * r2;
            InfoTableRow {
                kind: spec.kind,
                parameter,
                jumpless_qfi: val,
                jump_traj_qfi: val,
                cfi_timings: 0.0,
                avg_traj_qfi: val,
                total: val,
                conventional_qfi: val * u,
                caveats: Vec::new(),
            }
        }
        (Parameter::Gamma, kind) => {
            if gamma <= 0.0 {
                return Err(ChannelError::UnsupportedCombination(
                    "rate estimation needs gamma > 0".into(),
                ));
            }
            if spec.omega != 0.0 {
                caveats.push(
                    "rate-information row derived at omega = 0; entries evaluated at omega = 0"
                        .into(),
                );
            }
            match kind {
                ChannelKind::Relaxation => {
                    let p0 = ruu * u + rdd;
                    let total = ruu * (1.0 - u) / (gamma * gamma);
                    let avg = t * t * ruu * rdd * u / p0;
                    InfoTableRow {
                        kind,
                        parameter,
                        jumpless_qfi: t * t * ruu * rdd * u / (p0 * p0),
                        jump_traj_qfi: 0.0,
                        cfi_timings: total - avg,
                        avg_traj_qfi: avg,
                        total,
                        conventional_qfi: relax_conventional_qfi_gamma(ruu, r2, u, t),
                        caveats,
                    }
                }
                ChannelKind::SpinFlip | ChannelKind::Dephasing => {
                    // Flip is dephasing in the |+->/|-> basis; the ensemble
                    // QFI uses the corresponding matrix elements.
                    let (pp, mm, off2) = if kind == ChannelKind::SpinFlip {
                        let pp = 0.5 + rud.re;
                        let mm = 0.5 - rud.re;
                        let pm = c64(0.5 * (ruu - rdd), -rud.im);
                        (pp, mm, pm.norm_sqr())
                    } else {
                        (ruu, rdd, r2)
                    };
                    let total = t / (4.0 * gamma);
                    InfoTableRow {
                        kind,
                        parameter,
                        jumpless_qfi: 0.0,
                        jump_traj_qfi: 0.0,
                        cfi_timings: total,
                        avg_traj_qfi: 0.0,
                        total,
                        conventional_qfi: coherence_decay_qfi_gamma(pp, mm, off2, u, t),
                        caveats,
                    }
                }
            }
        }
    };
    debug_assert!(row.total >= row.conventional_qfi - 1e-10 * row.total.abs().max(1.0));
    Ok(row)
}

/// Total frequency information per cycle for the spin-flip channel:
/// (32 r2 / gamma^2)(gamma T/2 - (1 - e^{-gamma T/2})), series-expanded
/// near gamma = 0 where the closed form cancels catastrophically.
pub(crate) fn flip_total_omega(gamma: f64, t: f64, r2: f64) -> f64 {
    let x = gamma * t / 2.0;
    if x < 1e-3 {
        // 8 T^2 r2 sum_k (-x)^k / (k+2)!
        let s = 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0;
        8.0 * t * t * r2 * s
    } else {
        32.0 * r2 / (gamma * gamma) * (x - 1.0 + (-x).exp())
    }
}

/// Exact frequency QFI of the spin-flip non-selective state, from the
/// analytic omega-derivative of its Bloch vector. The widely quoted
/// 4T^2 r2 e^{-gamma T/2} is this value to leading order in gamma/omega.
fn flip_conventional_qfi_omega(
    spec: &ChannelSpec,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<f64, ChannelError> {
    let (ruu, rdd, rud) = qubit_entries(rho0);
    let (omega, gamma) = (spec.omega, spec.gamma);
    let w2 = omega * omega - gamma * gamma / 16.0;
    let (c, s) = cos_sinc(w2, t);
    let (dc_dw2, ds_dw2) = cos_sinc_dw2(w2, t);
    // d(w2)/d(omega) = 2 omega.
    let dc = 2.0 * omega * dc_dw2;
    let ds = 2.0 * omega * ds_dw2;

    let f = c64(c, -omega * s);
    let g = gamma / 4.0 * s;
    let df = c64(dc, -s - omega * ds);
    let dg = gamma / 4.0 * ds;

    let damp = (-gamma * t / 4.0).exp();
    let off = (f * rud + g * rud.conj()) * damp;
    let doff = (df * rud + dg * rud.conj()) * damp;
    let nz = (-gamma * t / 2.0).exp() * (ruu - rdd);

    let n = BlochVector::new([2.0 * off.re, -2.0 * off.im, nz]).map_err(|_| {
        ChannelError::UnsupportedCombination("ensemble state left the Bloch ball".into())
    })?;
    Ok(fisher::qfi_qubit_bloch(&n, [2.0 * doff.re, -2.0 * doff.im, 0.0])?)
}

/// Rate QFI of the relaxation non-selective state.
fn relax_conventional_qfi_gamma(ruu: f64, r2: f64, u: f64, t: f64) -> f64 {
    let denom = ruu * (1.0 - ruu * u) - r2;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    t * t * ruu * (ruu - r2 * (ruu * u + 1.0)) * u / denom
}

/// Rate QFI of a pure coherence-decay ensemble state with populations
/// (pp, mm) and squared coherence off2 in the decaying basis.
fn coherence_decay_qfi_gamma(pp: f64, mm: f64, off2: f64, u: f64, t: f64) -> f64 {
    let pop = pp * mm;
    if off2 < 1e-300 || pop < 1e-300 {
        return 0.0;
    }
    t * t * off2 * u * pop / (pop - off2 * u)
}

/// Mean duration of one relaxation-channel measurement cycle when a
/// detected decay ends the cycle early.
pub fn average_cycle_time(rho0: &DensityMatrix, gamma: f64, t: f64) -> f64 {
    let (ruu, rdd, _) = qubit_entries(rho0);
    if gamma == 0.0 {
        return t;
    }
    ruu * (-(-gamma * t).exp_m1()) / gamma + rdd * t
}

/// Optimized information extraction rate (information per unit time) and
/// the optimizing initial state.
///
/// MQT rates divide by the average cycle time where early stopping applies
/// (relaxation); conventional rates always divide by T. The spin-flip
/// frequency entries inherit the leading-order gamma/omega validity of the
/// ensemble QFI they are built from.
pub fn extraction_rate(
    spec: &ChannelSpec,
    parameter: Parameter,
    method: RateMethod,
    t: f64,
) -> Result<(f64, DensityMatrix), ChannelError> {
    assert!(t > 0.0 && t.is_finite(), "horizon must be finite and positive");
    let gamma = spec.gamma;
    if gamma <= 0.0 {
        return Err(ChannelError::UnsupportedCombination(
            "extraction rates need gamma > 0".into(),
        ));
    }
    let gt = gamma * t;
    let up = DensityMatrix::qubit(1.0, c64(0.0, 0.0)).expect("valid state");
    let plus = DensityMatrix::qubit(0.5, c64(0.5, 0.0)).expect("valid state");

    let (rate, rho) = match (spec.kind, parameter, method) {
        (ChannelKind::Relaxation, Parameter::Omega, RateMethod::Mqt) => {
            // Saturated at rdd/ruu = sqrt((1 - e^{-gT})/(gT e^{gT})), pure.
            let ratio = ((-(-gt).exp_m1()) / (gt * gt.exp())).sqrt();
            let rdd = ratio / (1.0 + ratio);
            let ruu = 1.0 - rdd;
            let opt = DensityMatrix::qubit(ruu, c64((ruu * rdd).sqrt(), 0.0))
                .expect("valid state");
            let denom = (gt.exp_m1()).sqrt() + gt.sqrt();
            (4.0 * gamma * t * t / (denom * denom), opt)
        }
        (ChannelKind::Relaxation, Parameter::Omega, RateMethod::Conventional) => {
            ((-gt).exp() * t, plus)
        }
        (ChannelKind::Relaxation, Parameter::Gamma, RateMethod::Mqt) => (1.0 / gamma, up),
        (ChannelKind::Relaxation, Parameter::Gamma, RateMethod::Conventional) => {
            (t / gt.exp_m1(), up)
        }
        (ChannelKind::SpinFlip, Parameter::Omega, RateMethod::Mqt) => {
            (flip_total_omega(gamma, t, 0.25) / t, plus)
        }
        (ChannelKind::SpinFlip, Parameter::Omega, RateMethod::Conventional) => {
            ((-gt / 2.0).exp() * t, plus)
        }
        (ChannelKind::SpinFlip, Parameter::Gamma, RateMethod::Mqt) => {
            // Every initial state attains it; the timings carry everything.
            (1.0 / (4.0 * gamma), up)
        }
        (ChannelKind::SpinFlip, Parameter::Gamma, RateMethod::Conventional) => {
            (t / (4.0 * gt.exp_m1()), up)
        }
        (ChannelKind::Dephasing, Parameter::Omega, RateMethod::Mqt) => (t, plus),
        (ChannelKind::Dephasing, Parameter::Omega, RateMethod::Conventional) => {
            ((-gt).exp() * t, plus)
        }
        (ChannelKind::Dephasing, Parameter::Gamma, RateMethod::Mqt) => {
            (1.0 / (4.0 * gamma), plus)
        }
        (ChannelKind::Dephasing, Parameter::Gamma, RateMethod::Conventional) => {
            (t / (4.0 * gt.exp_m1()), plus)
        }
    };
    Ok((rate, rho))
}

/// Long-time asymptote of the optimized MQT rate, where the channel has one
/// distinct from the exact optimum curve.
pub fn extraction_rate_longtime(
    spec: &ChannelSpec,
    parameter: Parameter,
    t: f64,
) -> Option<f64> {
    if spec.gamma <= 0.0 {
        return None;
    }
    match (spec.kind, parameter) {
        (ChannelKind::Relaxation, Parameter::Omega) => {
            Some(4.0 * spec.gamma * t * t * (-spec.gamma * t).exp())
        }
        (ChannelKind::SpinFlip, Parameter::Omega) => Some(4.0 / spec.gamma),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::evolve;

    fn spec(kind: ChannelKind, omega: f64, gamma: f64) -> ChannelSpec {
        ChannelSpec::new(kind, omega, gamma).unwrap()
    }

    fn test_state() -> DensityMatrix {
        DensityMatrix::qubit(0.6, c64(0.25, 0.15)).unwrap()
    }

    #[test]
    fn generator_algebra_per_channel() {
        // Dephasing jump part commutes with the jumpless part at any omega.
        for omega in [0.0, 1.3] {
            let (_, j, l0) = generators(&spec(ChannelKind::Dephasing, omega, 0.8));
            let comm = &(j.matrix() * l0.matrix()) - &(l0.matrix() * j.matrix());
            assert!(comm.max_abs() < 1e-12);
        }
        // Relaxation: J^2 = 0 (at most one jump).
        let (_, j, _) = generators(&spec(ChannelKind::Relaxation, 1.0, 2.0));
        assert!((j.matrix() * j.matrix()).max_abs() < 1e-15);
        // Spin flip: J^2 = (gamma/4)^2 identity.
        let gamma = 2.0;
        let (_, j, _) = generators(&spec(ChannelKind::SpinFlip, 1.0, gamma));
        let j2 = j.matrix() * j.matrix();
        let expect = CMatrix::identity(4).scale_re((gamma / 4.0) * (gamma / 4.0));
        assert!((&j2 - &expect).max_abs() < 1e-15);
    }

    #[test]
    fn jumpless_traces_match_survival_probabilities() {
        let up = DensityMatrix::qubit(1.0, c64(0.0, 0.0)).unwrap();
        let s = jumpless_state(&spec(ChannelKind::Relaxation, 0.7, 1.0), &up, 1.0);
        assert!((s.trace() - (-1.0f64).exp()).abs() < 1e-14);

        let s = jumpless_state(&spec(ChannelKind::SpinFlip, 0.7, 1.0), &test_state(), 4.0);
        assert!((s.trace() - (-1.0f64).exp()).abs() < 1e-14);

        let s = jumpless_state(&spec(ChannelKind::Dephasing, 0.7, 1.0), &test_state(), 0.0);
        assert!((s.matrix() - test_state().matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_generator_evolution_on_a_grid() {
        let rho0 = test_state();
        for kind in [ChannelKind::Relaxation, ChannelKind::SpinFlip, ChannelKind::Dephasing] {
            for gamma in [0.1, 1.0, 10.0] {
                for omega in [0.0, 1.0, 10.0] {
                    for t in [0.1, 1.0, 5.0] {
                        let sp = spec(kind, omega, gamma);
                        let (full, _, l0) = generators(&sp);

                        let closed = jumpless_state(&sp, &rho0, t);
                        let evolved =
                            evolve(&l0, &UnnormalizedState::from_density(&rho0), t).unwrap();
                        assert!(
                            (closed.matrix() - evolved.matrix()).max_abs() < 1e-10,
                            "jumpless {kind:?} gamma={gamma} omega={omega} t={t}"
                        );

                        let closed = nonselective_state(&sp, &rho0, t);
                        let evolved =
                            evolve(&full, &UnnormalizedState::from_density(&rho0), t).unwrap();
                        assert!(
                            (closed.matrix() - evolved.matrix()).max_abs() < 1e-10,
                            "ensemble {kind:?} gamma={gamma} omega={omega} t={t}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn relaxation_jump_trajectories() {
        let up = DensityMatrix::qubit(1.0, c64(0.0, 0.0)).unwrap();
        let sp = spec(ChannelKind::Relaxation, 0.3, 1.0);
        let jumps = JumpTimes::new(vec![0.5], 1.0).unwrap();
        let s = jump_trajectory_state(&sp, &up, &jumps).unwrap();
        assert!((s.trace() - (-0.5f64).exp()).abs() < 1e-14);
        assert!((s.matrix()[(1, 1)].re - (-0.5f64).exp()).abs() < 1e-14);

        let two = JumpTimes::new(vec![0.2, 0.5], 1.0).unwrap();
        assert!(matches!(
            jump_trajectory_state(&sp, &up, &two),
            Err(ChannelError::TooManyJumps(2))
        ));
    }

    #[test]
    fn net_phase_time_piecewise_integral() {
        // Jumps at 1 and 3 over [0, 4]: +1 - 2 + 1 = 0.
        let jumps = JumpTimes::new(vec![1.0, 3.0], 4.0).unwrap();
        assert_eq!(net_phase_time(&jumps), 0.0);
        let single = JumpTimes::new(vec![0.75], 1.0).unwrap();
        assert!((net_phase_time(&single) - 0.5).abs() < 1e-15);
        assert_eq!(net_phase_time(&JumpTimes::none(2.5)), 2.5);
    }

    #[test]
    fn flip_trajectory_with_zero_net_phase_keeps_initial_coherence() {
        let sp = spec(ChannelKind::SpinFlip, 2.0, 1.0);
        let rho0 = test_state();
        let jumps = JumpTimes::new(vec![1.0, 3.0], 4.0).unwrap();
        let s = jump_trajectory_state(&sp, &rho0, &jumps).unwrap();
        let amp = (0.25f64).powi(2) * (-1.0f64).exp();
        assert!((s.matrix()[(0, 1)] - rho0.rho_updown() * amp).norm() < 1e-15);
    }

    #[test]
    fn dephasing_even_jump_state_is_scaled_jumpless() {
        let sp = spec(ChannelKind::Dephasing, 1.1, 0.9);
        let rho0 = test_state();
        let t = 2.0;
        let none = jump_trajectory_state(&sp, &rho0, &JumpTimes::none(t)).unwrap();
        let jumps = JumpTimes::new(vec![0.3, 1.7], t).unwrap();
        let two = jump_trajectory_state(&sp, &rho0, &jumps).unwrap();
        let scale = (sp.gamma / 4.0) * (sp.gamma / 4.0);
        assert!((&two.matrix().scale_re(1.0 / scale) - none.matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn relaxation_trajectory_sum_reproduces_ensemble_state() {
        // Jumpless + integral of the jump branch (exact: the branch is
        // gamma e^{-gamma t1} ruu |down><down|, integrating to
        // (1-e^{-gamma T}) ruu |down><down|).
        let sp = spec(ChannelKind::Relaxation, 0.8, 1.3);
        let rho0 = test_state();
        let t = 1.7;
        let jumpless = jumpless_state(&sp, &rho0, t);
        let jump_mass = (1.0 - (-sp.gamma * t).exp()) * rho0.rho_upup();
        let mut total = jumpless.matrix().clone();
        total[(1, 1)] += c64(jump_mass, 0.0);
        let ens = nonselective_state(&sp, &rho0, t);
        assert!((&total - ens.matrix()).max_abs() < 1e-14);
    }

    #[test]
    fn nonselective_examples() {
        // Relaxation off-diagonal magnitude 0.5 e^{-1/2} at gamma = T = 1.
        let half = DensityMatrix::qubit(0.5, c64(0.5, 0.0)).unwrap();
        let ens = nonselective_state(&spec(ChannelKind::Relaxation, 0.9, 1.0), &half, 1.0);
        assert!((ens.rho_updown().norm() - 0.5 * (-0.5f64).exp()).abs() < 1e-14);

        // gamma = 0: bare Larmor precession.
        let rho0 = test_state();
        for kind in [ChannelKind::Relaxation, ChannelKind::SpinFlip, ChannelKind::Dephasing] {
            let ens = nonselective_state(&spec(kind, 1.4, 0.0), &rho0, 2.0);
            let expect = c64(0.0, -1.4 * 2.0).exp() * rho0.rho_updown();
            assert!((ens.rho_updown() - expect).norm() < 1e-13, "{kind:?}");
            assert!((ens.rho_upup() - rho0.rho_upup()).abs() < 1e-13);
        }
    }

    #[test]
    fn table_row_anchor_values() {
        // Spin flip, frequency, gamma=1, T=2, |r01|^2 = 1/4: total = 8/e.
        let plus = DensityMatrix::qubit(0.5, c64(0.5, 0.0)).unwrap();
        let row =
            table1_row(&spec(ChannelKind::SpinFlip, 100.0, 1.0), Parameter::Omega, &plus, 2.0)
                .unwrap();
        assert!((row.total - 8.0 * (-1.0f64).exp()).abs() < 1e-12, "total {}", row.total);
        assert_eq!(row.cfi_timings, 0.0);
        assert!(row.is_valid());

        // Dephasing, frequency: everything 4 T^2 r2, ensemble damped.
        let row =
            table1_row(&spec(ChannelKind::Dephasing, 1.0, 1.0), Parameter::Omega, &plus, 3.0)
                .unwrap();
        assert_eq!(row.total, 9.0);
        assert_eq!(row.jump_traj_qfi, 9.0);
        assert!((row.conventional_qfi - 9.0 * (-3.0f64).exp()).abs() < 1e-12);

        // Relaxation, rate, excited start: total = (1 - e^{-1}).
        let up = DensityMatrix::qubit(1.0, c64(0.0, 0.0)).unwrap();
        let row =
            table1_row(&spec(ChannelKind::Relaxation, 0.0, 1.0), Parameter::Gamma, &up, 1.0)
                .unwrap();
        assert!((row.total - (1.0 - (-1.0f64).exp())).abs() < 1e-12);

        // Flip/dephasing rate rows: all information is in the timings.
        let row =
            table1_row(&spec(ChannelKind::SpinFlip, 0.0, 2.0), Parameter::Gamma, &plus, 4.0)
                .unwrap();
        assert_eq!(row.total, 0.5);
        assert_eq!(row.cfi_timings, 0.5);
        assert_eq!(row.avg_traj_qfi, 0.0);
    }

    #[test]
    fn gamma_row_needs_positive_gamma_and_flags_nonzero_omega() {
        let plus = DensityMatrix::qubit(0.5, c64(0.5, 0.0)).unwrap();
        assert!(matches!(
            table1_row(&spec(ChannelKind::SpinFlip, 0.0, 0.0), Parameter::Gamma, &plus, 1.0),
            Err(ChannelError::UnsupportedCombination(_))
        ));
        let row =
            table1_row(&spec(ChannelKind::SpinFlip, 0.5, 1.0), Parameter::Gamma, &plus, 1.0)
                .unwrap();
        assert!(!row.is_valid());
    }

    #[test]
    fn flip_frequency_conventional_matches_leading_order_deep_in_regime() {
        // gamma/omega = 1e-5: the leading-order form should agree to ~1e-4.
        let plus = DensityMatrix::qubit(0.5, c64(0.5, 0.0)).unwrap();
        let (gamma, t) = (1.0, 2.0);
        let row = table1_row(
            &spec(ChannelKind::SpinFlip, 1e5, gamma),
            Parameter::Omega,
            &plus,
            t,
        )
        .unwrap();
        let leading = 4.0 * t * t * 0.25 * (-gamma * t / 2.0).exp();
        assert!(
            (row.conventional_qfi - leading).abs() < 1e-3 * leading,
            "exact {} vs leading {leading}",
            row.conventional_qfi
        );
        assert!(row.is_valid());

        // Out of regime the exact value deviates and the row is flagged.
        let row = table1_row(
            &spec(ChannelKind::SpinFlip, 1.0, gamma),
            Parameter::Omega,
            &plus,
            t,
        )
        .unwrap();
        assert!(!row.is_valid());
    }

    #[test]
    fn flip_total_series_branch_matches_closed_form() {
        let r2 = 0.21;
        let t = 3.0;
        // Just above the series switch the closed form should equal a
        // longer manual expansion in x = gamma T / 2.
        let x = 2e-3;
        let closed = flip_total_omega(2.0 * x / t, t, r2);
        let s = 0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0 + x * x * x * x / 720.0;
        assert!((closed - 8.0 * t * t * r2 * s).abs() < 1e-11 * closed);
        // gamma -> 0 limit is the unitary value 4 T^2 r2.
        assert!((flip_total_omega(1e-14, t, r2) - 4.0 * t * t * r2).abs() < 1e-10);
    }

    #[test]
    fn cycle_time_examples() {
        let up = DensityMatrix::qubit(1.0, c64(0.0, 0.0)).unwrap();
        assert!((average_cycle_time(&up, 1.0, 2.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-14);
        let down = DensityMatrix::qubit(0.0, c64(0.0, 0.0)).unwrap();
        assert_eq!(average_cycle_time(&down, 1.0, 2.0), 2.0);
        assert_eq!(average_cycle_time(&up, 0.0, 2.0), 2.0);
        assert!((average_cycle_time(&up, 1e-13, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn extraction_rate_closed_forms() {
        let sp = spec(ChannelKind::Relaxation, 0.0, 0.7);
        let (rate, opt) = extraction_rate(&sp, Parameter::Gamma, RateMethod::Mqt, 3.0).unwrap();
        assert!((rate - 1.0 / 0.7).abs() < 1e-14);
        assert_eq!(opt.rho_downdown(), 0.0);

        let sp = spec(ChannelKind::SpinFlip, 0.0, 2.0);
        let (rate, _) = extraction_rate(&sp, Parameter::Gamma, RateMethod::Mqt, 1.0).unwrap();
        assert_eq!(rate, 0.125);

        let sp = spec(ChannelKind::Dephasing, 1.0, 0.5);
        let (rate, opt) = extraction_rate(&sp, Parameter::Omega, RateMethod::Mqt, 2.0).unwrap();
        assert_eq!(rate, 2.0);
        assert!((opt.rho_updown().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn relaxation_frequency_mqt_rate_is_the_optimum_over_initial_states() {
        // Scan pure states against the closed-form saturated bound.
        let (gamma, t) = (1.0, 2.5);
        let sp = spec(ChannelKind::Relaxation, 0.4, gamma);
        let (bound, opt) =
            extraction_rate(&sp, Parameter::Omega, RateMethod::Mqt, t).unwrap();
        let mut best = 0.0f64;
        for k in 1..400 {
            let ruu = k as f64 / 400.0;
            let rho = DensityMatrix::qubit(ruu, c64((ruu * (1.0 - ruu)).sqrt(), 0.0)).unwrap();
            let row = table1_row(&sp, Parameter::Omega, &rho, t).unwrap();
            let rate = row.total / average_cycle_time(&rho, gamma, t);
            assert!(rate <= bound * (1.0 + 1e-12), "state ruu={ruu} beats the bound");
            best = best.max(rate);
        }
        assert!((best - bound).abs() < 1e-4 * bound, "scan best {best} vs bound {bound}");
        // The reported optimizer attains the bound.
        let row = table1_row(&sp, Parameter::Omega, &opt, t).unwrap();
        let rate = row.total / average_cycle_time(&opt, gamma, t);
        assert!((rate - bound).abs() < 1e-12 * bound);
    }

    #[test]
    fn longtime_asymptote_ratio_is_4_gamma_t() {
        let (gamma, t) = (2.0, 5.0);
        let sp = spec(ChannelKind::Relaxation, 0.3, gamma);
        let long = extraction_rate_longtime(&sp, Parameter::Omega, t).unwrap();
        let (conv, _) =
            extraction_rate(&sp, Parameter::Omega, RateMethod::Conventional, t).unwrap();
        assert!((long / conv - 4.0 * gamma * t).abs() < 1e-12 * 4.0 * gamma * t);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(ChannelSpec::new(ChannelKind::SpinFlip, 1.0, -0.1).is_err());
        assert!(JumpTimes::new(vec![0.5, 0.5], 1.0).is_err());
        assert!(JumpTimes::new(vec![1.5], 1.0).is_err());
        let sp = spec(ChannelKind::SpinFlip, 1.0, 0.0);
        assert!(matches!(
            extraction_rate(&sp, Parameter::Gamma, RateMethod::Mqt, 1.0),
            Err(ChannelError::UnsupportedCombination(_))
        ));
    }
}
