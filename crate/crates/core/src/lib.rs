//! Estimation theory of monitored quantum trajectories.
//!
//! A decohering probe leaks information into its environment. Detecting the
//! individual quantum jumps (instead of discarding the environment) turns the
//! record of jump timings plus the conditional final state into an
//! estimation resource. This crate computes what that resource is worth:
//!
//! * [`qstate`]: dense density-matrix and superoperator machinery with exact
//!   Lindblad propagation on small Hilbert spaces.
//! * [`fisher`]: quantum/classical Fisher information, the symmetric
//!   logarithmic derivative, and the split of the total information into the
//!   jump-timing part and the trajectory-averaged part.
//! * [`channels`]: closed forms for the three canonical spin-1/2 channels
//!   (relaxation, spin flip, dephasing): trajectory states, non-selective
//!   states, information tables, and extraction rates.
//! * [`mcsim`]: reproducible parallel Monte Carlo unraveling used as an
//!   independent oracle for every closed form.
//! * [`qecmon`]: syndrome-based monitoring at a finite measurement interval
//!   and the odd-m phase-flip logical-code construction.
//! * [`estimate`]: posterior updating, MLE/Bayes point estimators, and the
//!   Cramer-Rao saturation harness.
//!
//! The linear-algebra substrate is generic over the floating-point scalar
//! (see [`scalar::Scalar`]); the physics modules work in `f64` via the
//! aliases below because their tolerances are absolute double-precision
//! contracts.

pub mod scalar;

pub mod linalg;

pub mod channels;
pub mod estimate;
pub mod fisher;
pub mod mcsim;
pub mod qecmon;
pub mod qstate;

/// Complex double-precision scalar.
pub type C64 = num_complex::Complex<f64>;

/// Dense complex matrix over `f64`, the concrete type used by the physics
/// modules.
pub type CMat = linalg::CMatrix<f64>;

/// Convenience constructor for [`C64`].
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
