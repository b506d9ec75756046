//! Monte Carlo jump unraveling.
//!
//! Samples detector records exactly in distribution (no time discretization:
//! waiting times come from inverting the closed-form survival functions) and
//! turns them into statistical estimates of the timing information, the
//! trajectory-averaged QFI, and their sum. Every analytic expression in
//! `channels` can be checked against these estimators.
//!
//! Reproducibility contract: trajectory i of a run with seed s is generated
//! from an RNG stream keyed by (s, i), so serial and parallel runs of any
//! worker count produce bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::channels::{
    jump_trajectory_state, ChannelKind, ChannelSpec, JumpTimes, Parameter,
};
use crate::linalg::inner;
use crate::qstate::DensityMatrix;
use crate::C64;

/// One sampled detector record over a cycle.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub jumps: JumpTimes,
    /// Normalized conditional state at the end of the cycle.
    pub final_state: DensityMatrix,
    /// Log of the record's occurrence probability (density in the times).
    pub log_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Seed of the run that produced the samples; 0 when estimated from
    /// externally supplied records.
    pub seed: u64,
}

/// RNG for one trajectory: a dedicated stream of the seeded generator.
pub fn trajectory_rng(seed: u64, trajectory_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(trajectory_index);
    rng
}

/// Draws one detector record. Exact in distribution: jump prob and waiting
/// times by inverse transform on the survival function, which is
/// ruu e^{-gamma t} + rdd for relaxation and e^{-gamma t/4} (state
/// independent) for spin flip and dephasing. A generic bisection fallback
/// is unnecessary for these three channels; the tests keep one as an oracle.
pub fn sample_trajectory(
    spec: &ChannelSpec,
    rho0: &DensityMatrix,
    t: f64,
    seed: u64,
    stream: u64,
) -> TrajectoryRecord {
    assert!(t >= 0.0 && t.is_finite(), "horizon must be finite and non-negative");
    let mut rng = trajectory_rng(seed, stream);
    let gamma = spec.gamma;
    let jumps = match spec.kind {
        ChannelKind::Relaxation => {
            let ruu = rho0.rho_upup();
            let v: f64 = rng.gen();
            if gamma > 0.0 && v < ruu * (-(-gamma * t).exp_m1()) {
                // Inverse of the jump-time CDF ruu (1 - e^{-gamma t}).
                let t1 = -(1.0 - v / ruu).ln() / gamma;
                JumpTimes::new(vec![t1.min(t)], t).expect("inverse CDF stays in range")
            } else {
                JumpTimes::none(t)
            }
        }
        ChannelKind::SpinFlip | ChannelKind::Dephasing => {
            let mut times = Vec::new();
            if gamma > 0.0 {
                let mut acc = 0.0;
                loop {
                    let v: f64 = rng.gen();
                    acc += -4.0 * (1.0 - v).ln() / gamma;
                    if acc >= t {
                        break;
                    }
                    times.push(acc);
                }
            }
            JumpTimes::new(times, t).expect("waiting times are increasing")
        }
    };
    record_from_jumps(spec, rho0, jumps)
}

fn record_from_jumps(
    spec: &ChannelSpec,
    rho0: &DensityMatrix,
    jumps: JumpTimes,
) -> TrajectoryRecord {
    let n = jumps.count();
    let t = jumps.horizon();
    let gamma = spec.gamma;
    let log_weight = match spec.kind {
        ChannelKind::Relaxation => {
            if n == 0 {
                (rho0.rho_upup() * (-gamma * t).exp() + rho0.rho_downdown()).ln()
            } else {
                (gamma * rho0.rho_upup()).ln() - gamma * jumps.times()[0]
            }
        }
        ChannelKind::SpinFlip | ChannelKind::Dephasing => {
            // Density of an ordered rate-gamma/4 point process realization.
            let jump_part = if n == 0 { 0.0 } else { n as f64 * (gamma / 4.0).ln() };
            jump_part - gamma * t / 4.0
        }
    };
    let (final_state, _) = jump_trajectory_state(spec, rho0, &jumps)
        .expect("sampler respects the channel's jump budget")
        .normalize()
        .expect("sampled trajectories have positive probability");
    TrajectoryRecord { jumps, final_state, log_weight }
}

/// Samples `n` records on independent streams; ordered and deterministic.
pub fn sample_records(
    spec: &ChannelSpec,
    rho0: &DensityMatrix,
    t: f64,
    n: usize,
    seed: u64,
) -> Vec<TrajectoryRecord> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_trajectory(spec, rho0, t, seed, i))
        .collect()
}

/// Analytic QFI carried by one trajectory's conditional state.
///
/// Spin flip / frequency: 4 |r01|^2 Phi^2 with Phi the net phase time;
/// dephasing / frequency: the constant 4 T^2 |r01|^2; relaxation: only the
/// jumpless branch carries information. Rate trajectories of flip and
/// dephasing are rate-independent after normalization, hence 0.
pub fn trajectory_qfi(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    jumps: &JumpTimes,
) -> f64 {
    let r2 = rho0.rho_updown().norm_sqr();
    let t = jumps.horizon();
    match (spec.kind, parameter) {
        (ChannelKind::SpinFlip, Parameter::Omega) => {
            let phi = crate::channels::net_phase_time(jumps);
            4.0 * r2 * phi * phi
        }
        (ChannelKind::Dephasing, Parameter::Omega) => 4.0 * t * t * r2,
        (ChannelKind::Relaxation, _) if jumps.count() > 0 => 0.0,
        (ChannelKind::Relaxation, parameter) => {
            let (ruu, rdd) = (rho0.rho_upup(), rho0.rho_downdown());
            let u = (-spec.gamma * t).exp();
            let p0 = ruu * u + rdd;
            match parameter {
                Parameter::Omega => 4.0 * t * t * r2 * u / (p0 * p0),
                Parameter::Gamma => t * t * ruu * rdd * u / (p0 * p0),
            }
        }
        (ChannelKind::SpinFlip | ChannelKind::Dephasing, Parameter::Gamma) => 0.0,
    }
}

/// Score of the record: the derivative of its log probability (density).
/// Identically zero for the frequency, which never enters jump statistics.
pub fn timing_score(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    jumps: &JumpTimes,
) -> f64 {
    if parameter == Parameter::Omega {
        return 0.0;
    }
    let gamma = spec.gamma;
    let t = jumps.horizon();
    match spec.kind {
        ChannelKind::SpinFlip | ChannelKind::Dephasing => {
            jumps.count() as f64 / gamma - t / 4.0
        }
        ChannelKind::Relaxation => {
            if jumps.count() == 0 {
                let (ruu, rdd) = (rho0.rho_upup(), rho0.rho_downdown());
                let u = (-gamma * t).exp();
                -t * ruu * u / (ruu * u + rdd)
            } else {
                1.0 / gamma - jumps.times()[0]
            }
        }
    }
}

fn estimate_over(samples: Vec<f64>, seed: u64) -> McEstimate {
    let n = samples.len();
    assert!(n >= 1, "estimates need at least one sample");
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    McEstimate { mean, std_error: (var / n as f64).sqrt(), n_samples: n, seed }
}

/// Sample mean of the per-trajectory QFI (the trajectory-averaged term).
pub fn mc_traj_qfi(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    let samples: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let rec = sample_trajectory(spec, rho0, t, seed, i);
            trajectory_qfi(spec, parameter, rho0, &rec.jumps)
        })
        .collect();
    estimate_over(samples, seed)
}

/// Timing CFI estimated as the empirical second moment of the score over
/// externally supplied records (drawn at the true parameter value).
pub fn mc_timing_cfi(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    records: &[TrajectoryRecord],
) -> McEstimate {
    let samples: Vec<f64> = records
        .iter()
        .map(|r| {
            let s = timing_score(spec, parameter, rho0, &r.jumps);
            s * s
        })
        .collect();
    estimate_over(samples, 0)
}

/// Statistical estimate of the full monitored information: per sample,
/// score^2 plus the trajectory QFI, summed over a common record so the
/// standard error accounts for their correlation.
pub fn mc_total_info(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    let samples: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let rec = sample_trajectory(spec, rho0, t, seed, i);
            let s = timing_score(spec, parameter, rho0, &rec.jumps);
            s * s + trajectory_qfi(spec, parameter, rho0, &rec.jumps)
        })
        .collect();
    estimate_over(samples, seed)
}

/// Spread of the state-derivative overlaps over a pure-state ensemble:
/// max_l |<psi_l|d psi_l> - weighted mean|. The monitored ensemble attains
/// the extended-state bound exactly when this vanishes, because the overlap
/// is only defined up to one global (l-independent) constant.
pub fn saturation_diagnostic(ensemble: &[(f64, Vec<C64>, Vec<C64>)]) -> f64 {
    assert!(!ensemble.is_empty(), "diagnostic needs a non-empty ensemble");
    let mut total = 0.0;
    let mut mean = C64::new(0.0, 0.0);
    let overlaps: Vec<C64> = ensemble
        .iter()
        .map(|(w, psi, dpsi)| {
            let lam = inner(psi, dpsi);
            total += w;
            mean += lam * w;
            lam
        })
        .collect();
    mean /= total;
    overlaps.iter().map(|lam| (lam - mean).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{generators, nonselective_state, table1_row};
    use crate::qstate::{evolve, UnnormalizedState};
    use crate::{c64, CMat};

    fn spec(kind: ChannelKind, omega: f64, gamma: f64) -> ChannelSpec {
        ChannelSpec::new(kind, omega, gamma).unwrap()
    }

    fn plus() -> DensityMatrix {
        DensityMatrix::qubit(0.5, c64(0.5, 0.0)).unwrap()
    }

    #[test]
    fn identical_seeds_reproduce_across_worker_counts() {
        let sp = spec(ChannelKind::SpinFlip, 1.0, 2.0);
        let rho0 = plus();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_total_info(&sp, Parameter::Gamma, &rho0, 3.0, 4000, 99))
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        let c = mc_total_info(&sp, Parameter::Gamma, &rho0, 3.0, 4000, 100);
        assert_ne!(a.mean.to_bits(), c.mean.to_bits());
    }

    #[test]
    fn relaxation_jump_frequency_is_bernoulli() {
        let (gamma, t, n) = (1.0, 1.5, 100_000usize);
        let up = DensityMatrix::qubit(1.0, c64(0.0, 0.0)).unwrap();
        let sp = spec(ChannelKind::Relaxation, 0.3, gamma);
        let records = sample_records(&sp, &up, t, n, 7);
        let p = 1.0 - (-gamma * t).exp();
        let mean = records.iter().filter(|r| r.jumps.count() == 1).count() as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((mean - p).abs() < 3.0 * sigma, "mean {mean} expected {p} sigma {sigma}");
        assert!(records.iter().all(|r| r.jumps.count() <= 1));
    }

    #[test]
    fn flip_and_dephasing_jump_counts_are_poisson() {
        let (gamma, t, n) = (2.0, 3.0, 100_000usize);
        let lambda = gamma * t / 4.0;
        for kind in [ChannelKind::SpinFlip, ChannelKind::Dephasing] {
            let sp = spec(kind, 0.7, gamma);
            let records = sample_records(&sp, &plus(), t, n, 11);
            let mean =
                records.iter().map(|r| r.jumps.count() as f64).sum::<f64>() / n as f64;
            let sigma = (lambda / n as f64).sqrt();
            assert!(
                (mean - lambda).abs() < 3.0 * sigma,
                "{kind:?}: mean {mean} expected {lambda}"
            );
        }
    }

    #[test]
    fn zero_rate_never_jumps_and_precesses_unitarily() {
        let sp = spec(ChannelKind::Dephasing, 1.2, 0.0);
        let rho0 = DensityMatrix::qubit(0.7, c64(0.2, 0.1)).unwrap();
        let rec = sample_trajectory(&sp, &rho0, 2.0, 5, 0);
        assert_eq!(rec.jumps.count(), 0);
        assert_eq!(rec.log_weight, 0.0);
        let expect = c64(0.0, -1.2 * 2.0).exp() * rho0.rho_updown();
        assert!((rec.final_state.rho_updown() - expect).norm() < 1e-12);
    }

    #[test]
    fn closed_form_waiting_time_inversion_matches_bisection_oracle() {
        // Survival S(t) = tr e^{L0 t} rho is monotone; bisect it to 1e-12
        // and compare with the closed-form inverses the sampler uses.
        let rho0 = DensityMatrix::qubit(0.8, c64(0.1, -0.25)).unwrap();
        for (kind, target) in [
            (ChannelKind::Relaxation, 0.55),
            (ChannelKind::SpinFlip, 0.7),
            (ChannelKind::Dephasing, 0.9),
        ] {
            let sp = spec(kind, 0.9, 1.3);
            let (_, _, l0) = generators(&sp);
            let survival = |t: f64| {
                evolve(&l0, &UnnormalizedState::from_density(&rho0), t).unwrap().trace()
            };
            let (mut lo, mut hi) = (0.0f64, 50.0f64);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if survival(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let closed = match kind {
                // ruu e^{-gamma t} + rdd = target
                ChannelKind::Relaxation => {
                    -((target - rho0.rho_downdown()) / rho0.rho_upup()).ln() / sp.gamma
                }
                _ => -4.0 * target.ln() / sp.gamma,
            };
            assert!((closed - 0.5 * (lo + hi)).abs() < 1e-9, "{kind:?}");
        }
    }

    #[test]
    fn flip_traj_qfi_matches_closed_form_average() {
        // gamma=1, T=2, |r01|^2 = 1/4: averaged trajectory QFI = 8/e.
        let sp = spec(ChannelKind::SpinFlip, 1.0, 1.0);
        let est = mc_traj_qfi(&sp, Parameter::Omega, &plus(), 2.0, 100_000, 21);
        let expect = 8.0 * (-1.0f64).exp();
        assert!(
            (est.mean - expect).abs() < 3.0 * est.std_error,
            "mean {} expected {expect} stderr {}",
            est.mean,
            est.std_error
        );
        assert!(est.std_error > 0.0);
    }

    #[test]
    fn dephasing_traj_qfi_is_exact_with_zero_variance() {
        let sp = spec(ChannelKind::Dephasing, 0.4, 1.7);
        let rho0 = DensityMatrix::qubit(0.6, c64(0.3, 0.2)).unwrap();
        let r2 = rho0.rho_updown().norm_sqr();
        let est = mc_traj_qfi(&sp, Parameter::Omega, &rho0, 3.0, 20_000, 1);
        // Every sample is the same constant; only summation roundoff remains.
        let expect = 4.0 * 9.0 * r2;
        assert!((est.mean - expect).abs() <= 1e-11 * expect);
        assert!(est.std_error <= 1e-11 * expect);
    }

    #[test]
    fn relaxation_traj_qfi_matches_table() {
        let (gamma, t) = (0.8, 1.2);
        let sp = spec(ChannelKind::Relaxation, 0.5, gamma);
        let rho0 = DensityMatrix::qubit(0.6, c64(0.25, 0.15)).unwrap();
        let row = table1_row(&sp, Parameter::Omega, &rho0, t).unwrap();
        let est = mc_traj_qfi(&sp, Parameter::Omega, &rho0, t, 100_000, 33);
        assert!(
            (est.mean - row.avg_traj_qfi).abs() < 3.0 * est.std_error,
            "mean {} expected {} stderr {}",
            est.mean,
            row.avg_traj_qfi,
            est.std_error
        );
    }

    #[test]
    fn flip_timing_cfi_matches_table() {
        let (gamma, t) = (1.0, 4.0);
        let sp = spec(ChannelKind::SpinFlip, 0.0, gamma);
        let records = sample_records(&sp, &plus(), t, 100_000, 17);
        let est = mc_timing_cfi(&sp, Parameter::Gamma, &plus(), &records);
        assert!(
            (est.mean - 1.0).abs() < 3.0 * est.std_error,
            "mean {} stderr {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn relaxation_timing_cfi_approaches_inverse_rate_squared() {
        // Long horizon, excited start: nearly every cycle sees the decay and
        // the timing CFI approaches 1/gamma^2.
        let (gamma, t) = (1.0, 8.0);
        let up = DensityMatrix::qubit(1.0, c64(0.0, 0.0)).unwrap();
        let sp = spec(ChannelKind::Relaxation, 0.0, gamma);
        let records = sample_records(&sp, &up, t, 100_000, 3);
        let est = mc_timing_cfi(&sp, Parameter::Gamma, &up, &records);
        let row = table1_row(&sp, Parameter::Gamma, &up, t).unwrap();
        assert!((est.mean - row.cfi_timings).abs() < 3.0 * est.std_error);
        assert!((row.cfi_timings - 1.0).abs() < 1e-3);
    }

    #[test]
    fn frequency_scores_vanish_identically() {
        let sp = spec(ChannelKind::SpinFlip, 0.9, 1.1);
        let records = sample_records(&sp, &plus(), 2.0, 500, 2);
        let est = mc_timing_cfi(&sp, Parameter::Omega, &plus(), &records);
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn total_info_estimates_match_table_rows() {
        let cases = [
            (ChannelKind::SpinFlip, Parameter::Gamma, 1.5, 2.0),
            (ChannelKind::Relaxation, Parameter::Gamma, 0.7, 1.5),
            (ChannelKind::Dephasing, Parameter::Gamma, 2.0, 1.0),
            (ChannelKind::Relaxation, Parameter::Omega, 1.0, 1.0),
        ];
        for (kind, parameter, gamma, t) in cases {
            let sp = spec(kind, 0.0, gamma);
            let rho0 = DensityMatrix::qubit(0.6, c64(0.3, 0.1)).unwrap();
            let row = table1_row(&sp, parameter, &rho0, t).unwrap();
            let est = mc_total_info(&sp, parameter, &rho0, t, 100_000, 13);
            assert!(
                (est.mean - row.total).abs() < 3.0 * est.std_error.max(1e-12),
                "{kind:?}/{parameter:?}: mean {} expected {} stderr {}",
                est.mean,
                row.total,
                est.std_error
            );
        }
    }

    #[test]
    fn mean_final_state_reproduces_ensemble_state() {
        let sp = spec(ChannelKind::SpinFlip, 0.8, 1.0);
        let rho0 = DensityMatrix::qubit(0.7, c64(0.2, -0.3)).unwrap();
        let (t, n) = (1.5, 20_000usize);
        let records = sample_records(&sp, &rho0, t, n, 41);
        let mut mean = CMat::zeros(2, 2);
        for r in &records {
            mean = &mean + r.final_state.matrix();
        }
        mean = mean.scale_re(1.0 / n as f64);
        let expect = nonselective_state(&sp, &rho0, t);
        for i in 0..2 {
            for j in 0..2 {
                // Per-entry 3 sigma from the sample spread of that entry.
                let (mut vr, mut vi) = (0.0, 0.0);
                for r in &records {
                    let d = r.final_state.matrix()[(i, j)] - mean[(i, j)];
                    vr += d.re * d.re;
                    vi += d.im * d.im;
                }
                let sr = (vr / (n * (n - 1)) as f64).sqrt();
                let si = (vi / (n * (n - 1)) as f64).sqrt();
                let diff = mean[(i, j)] - expect.matrix()[(i, j)];
                assert!(diff.re.abs() < 3.0 * sr.max(1e-12), "entry ({i},{j}) re");
                assert!(diff.im.abs() < 3.0 * si.max(1e-12), "entry ({i},{j}) im");
            }
        }
    }

    #[test]
    fn saturation_diagnostic_flags_mixed_phase_ensembles() {
        // Single trajectory: spread is exactly zero.
        let psi = vec![c64(1.0, 0.0), c64(0.0, 0.0)];
        let dpsi = vec![c64(0.0, -0.5), c64(0.0, 0.0)];
        assert_eq!(saturation_diagnostic(&[(1.0, psi.clone(), dpsi.clone())]), 0.0);

        // Dephasing trajectories share one overlap regardless of parity.
        let (a, b) = (0.6f64.sqrt(), 0.4f64.sqrt());
        let t = 2.0;
        let mut ensemble = Vec::new();
        for parity in [1.0, -1.0] {
            let psi = vec![c64(a, 0.0), c64(parity * b, 0.0)];
            let dpsi = vec![
                c64(0.0, -t / 2.0) * psi[0],
                c64(0.0, t / 2.0) * psi[1],
            ];
            ensemble.push((0.5, psi, dpsi));
        }
        assert!(saturation_diagnostic(&ensemble) < 1e-10);

        // Relaxation: the decayed branch has a different overlap than the
        // jumpless branch, so the spread is visibly nonzero.
        let gamma = 1.0;
        let norm = (0.5 * (-gamma * t).exp() + 0.5).sqrt();
        let (au, bu) = (0.5f64.sqrt() * (-gamma * t / 2.0).exp() / norm, 0.5f64.sqrt() / norm);
        let jumpless = (
            norm * norm,
            vec![c64(au, 0.0), c64(bu, 0.0)],
            vec![c64(0.0, -t / 2.0 * au), c64(0.0, t / 2.0 * bu)],
        );
        let t1 = 1.8;
        let jumped = (
            1.0 - norm * norm,
            vec![c64(0.0, 0.0), c64(1.0, 0.0)],
            vec![c64(0.0, 0.0), c64(0.0, (t - t1) / 2.0)],
        );
        assert!(saturation_diagnostic(&[jumpless, jumped]) > 0.05);
    }
}
