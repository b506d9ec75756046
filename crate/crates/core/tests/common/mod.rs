//! Shared oracles for the integration and acceptance suites.
//!
//! Everything here rebuilds the physics through the generic superoperator
//! machinery: matrix exponentials of doubled block matrices for parameter
//! derivatives, product rules over jump insertions, and Gauss-Legendre
//! quadrature over ordered jump times. None of it reuses the closed forms
//! under test, so agreement is a real cross-check.

#![allow(dead_code)]

use trajfisher_core::channels::{generators, ChannelKind, ChannelSpec, Parameter};
use trajfisher_core::fisher::{mqt_total, qfi_mixed, FisherBreakdown, ParametrizedState};
use trajfisher_core::qstate::{
    make_density_matrix, matrix_exponential, DensityMatrix, Superoperator,
};
use trajfisher_core::{c64, C64, CMat};

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature

/// Nodes and weights on [-1, 1], by Newton iteration on the Legendre
/// recurrence. Good to ~1e-15 for the orders used here (n <= 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and P'_n(x) via the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// The same rule mapped onto [a, b].
pub fn gl_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

// ---------------------------------------------------------------------------
// Generators and their parameter derivatives

/// d/dtheta of (full, jump, jumpless). The generator is affine in each
/// parameter, so a unit secant is the exact derivative.
pub fn dgenerators(
    spec: &ChannelSpec,
    parameter: Parameter,
) -> (Superoperator, Superoperator, Superoperator) {
    let bumped = match parameter {
        Parameter::Omega => ChannelSpec::new(spec.kind, spec.omega + 1.0, spec.gamma),
        Parameter::Gamma => ChannelSpec::new(spec.kind, spec.omega, spec.gamma + 1.0),
    }
    .expect("bumped spec");
    let (f1, j1, l1) = generators(spec);
    let (f2, j2, l2) = generators(&bumped);
    (&f2 - &f1, &j2 - &j1, &l2 - &l1)
}

/// exp(G t) and its parameter derivative, both read off one exponential of
/// the doubled block matrix [[G, dG], [0, G]] t.
pub fn propagator_pair(g: &Superoperator, dg: &Superoperator, t: f64) -> (CMat, CMat) {
    let k = g.matrix().rows();
    let gm = g.matrix();
    let dgm = dg.matrix();
    let block = CMat::from_fn(2 * k, 2 * k, |i, j| {
        if i < k && j < k {
            gm[(i, j)]
        } else if i < k && j >= k {
            dgm[(i, j - k)]
        } else if i >= k && j >= k {
            gm[(i - k, j - k)]
        } else {
            c64(0.0, 0.0)
        }
    });
    let e = matrix_exponential(&block, t).expect("block exponential");
    let p = CMat::from_fn(k, k, |i, j| e[(i, j)]);
    let dp = CMat::from_fn(k, k, |i, j| e[(i, j + k)]);
    (p, dp)
}

fn axpy(y: &mut [C64], a: &CMat, x: &[C64]) {
    for (yi, v) in y.iter_mut().zip(a.matvec(x)) {
        *yi += v;
    }
}

/// Unnormalized trajectory state and its parameter derivative: alternate
/// jumpless propagation with jump insertions, product rule throughout.
/// `times` must be sorted into [0, t].
pub fn trajectory_state_pair(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    times: &[f64],
    t: f64,
) -> (CMat, CMat) {
    let d = rho0.dim();
    let (_, jump, jumpless) = generators(spec);
    let (_, djump, djumpless) = dgenerators(spec, parameter);
    let mut x = rho0.matrix().vectorize();
    let mut dx = vec![c64(0.0, 0.0); x.len()];
    let mut prev = 0.0;
    for &tj in times {
        assert!(tj >= prev && tj <= t, "jump times must be sorted into [0, t]");
        let (p, dp) = propagator_pair(&jumpless, &djumpless, tj - prev);
        let mut ndx = p.matvec(&dx);
        axpy(&mut ndx, &dp, &x);
        x = p.matvec(&x);
        dx = ndx;
        let mut jdx = jump.matrix().matvec(&dx);
        axpy(&mut jdx, djump.matrix(), &x);
        x = jump.matrix().matvec(&x);
        dx = jdx;
        prev = tj;
    }
    let (p, dp) = propagator_pair(&jumpless, &djumpless, t - prev);
    let mut ndx = p.matvec(&dx);
    axpy(&mut ndx, &dp, &x);
    x = p.matvec(&x);
    dx = ndx;
    (CMat::devectorize(&x, d), CMat::devectorize(&dx, d))
}

/// Record weight, weight derivative, normalized state, normalized-state
/// derivative for an unnormalized pair. Requires nonzero weight.
pub fn normalize_pair(rho: &CMat, drho: &CMat) -> (f64, f64, DensityMatrix, CMat) {
    let w = rho.trace().re;
    let dw = drho.trace().re;
    assert!(w > 0.0, "trajectory weight must be positive");
    let state = make_density_matrix(&rho.scale_re(1.0 / w)).expect("trajectory state");
    let dstate = &drho.scale_re(1.0 / w) - &rho.scale_re(dw / (w * w));
    (w, dw, state, dstate)
}

/// Nonselective state and its derivative straight through exp(L t).
pub fn nonselective_pair(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    t: f64,
) -> (DensityMatrix, CMat) {
    let (full, _, _) = generators(spec);
    let (dfull, _, _) = dgenerators(spec, parameter);
    let (p, dp) = propagator_pair(&full, &dfull, t);
    let v = rho0.matrix().vectorize();
    let rho = CMat::devectorize(&p.matvec(&v), rho0.dim());
    let drho = CMat::devectorize(&dp.matvec(&v), rho0.dim());
    (make_density_matrix(&rho).expect("nonselective state"), drho)
}

/// Benchmark QFI of the unconditional family, via the doubled propagator and
/// the spectral formula. Independent of the closed-form table.
pub fn conventional_qfi_pipeline(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    t: f64,
) -> f64 {
    let (rho, drho) = nonselective_pair(spec, parameter, rho0, t);
    qfi_mixed(&ParametrizedState::density(rho, drho).expect("family")).expect("qfi")
}

/// Information split for the decay channel from the exact two-branch record
/// ensemble: the no-jump record plus a quadrature over the single jump time
/// (a second jump is impossible once the excited population is gone).
/// Requires excited population > 0.
pub fn relaxation_breakdown_pipeline(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    t: f64,
    nodes: usize,
) -> FisherBreakdown {
    assert_eq!(spec.kind, ChannelKind::Relaxation);
    let mut ensemble = Vec::with_capacity(nodes + 1);
    let mut dweights = Vec::with_capacity(nodes + 1);
    let (r, dr) = trajectory_state_pair(spec, parameter, rho0, &[], t);
    let (w, dw, state, dstate) = normalize_pair(&r, &dr);
    ensemble.push((w, ParametrizedState::density(state, dstate).expect("no-jump family")));
    dweights.push(dw);
    let (ts, ws) = gl_on(0.0, t, nodes);
    for (tj, wq) in ts.iter().zip(&ws) {
        let (r, dr) = trajectory_state_pair(spec, parameter, rho0, &[*tj], t);
        let (dens, ddens, state, dstate) = normalize_pair(&r, &dr);
        ensemble.push((wq * dens, ParametrizedState::density(state, dstate).expect("jump family")));
        dweights.push(wq * ddens);
    }
    mqt_total(&ensemble, &dweights).expect("ensemble breakdown")
}

/// One n-jump term of the record series for the alternating-jump channels:
/// (mass, mass derivative, mass-weighted conditional QFI), integrated over
/// the ordered jump times with a per-level Gauss-Legendre rule.
pub fn series_term_pipeline(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    t: f64,
    n_jumps: usize,
    nodes: usize,
) -> (f64, f64, f64) {
    let mut acc = (0.0, 0.0, 0.0);
    let mut times = Vec::with_capacity(n_jumps);
    recurse_term(spec, parameter, rho0, t, n_jumps, nodes, 0.0, 1.0, &mut times, &mut acc);
    acc
}

fn recurse_term(
    spec: &ChannelSpec,
    parameter: Parameter,
    rho0: &DensityMatrix,
    t: f64,
    remaining: usize,
    nodes: usize,
    prev: f64,
    wacc: f64,
    times: &mut Vec<f64>,
    acc: &mut (f64, f64, f64),
) {
    if remaining == 0 {
        let (r, dr) = trajectory_state_pair(spec, parameter, rho0, times, t);
        let (dens, ddens, state, dstate) = normalize_pair(&r, &dr);
        let q = qfi_mixed(&ParametrizedState::density(state, dstate).expect("family"))
            .expect("conditional qfi");
        acc.0 += wacc * dens;
        acc.1 += wacc * ddens;
        acc.2 += wacc * dens * q;
        return;
    }
    let (ts, ws) = gl_on(prev, t, nodes);
    for (tj, wq) in ts.iter().zip(&ws) {
        times.push(*tj);
        recurse_term(spec, parameter, rho0, t, remaining - 1, nodes, *tj, wacc * wq, times, acc);
        times.pop();
    }
}

// ---------------------------------------------------------------------------
// Moment oracles for the alternating-jump record series

/// E[Phi^2] over n ordered uniform jump times on [0, t], where Phi is the
/// net alternating dwell time Phi = (-1)^n t + 2 sum_j (-1)^(j-1) t_(j).
/// Uses the order-statistic moments E[u_(j)] = j/(n+1) and
/// E[u_(j) u_(k)] = j(k+1)/((n+1)(n+2)) for j <= k.
pub fn phase_second_moment(n: usize, t: f64) -> f64 {
    if n == 0 {
        return t * t;
    }
    let np1 = (n + 1) as f64;
    let np2 = (n + 2) as f64;
    let mut lin = 0.0;
    for j in 1..=n {
        let s = if j % 2 == 1 { 1.0 } else { -1.0 };
        lin += s * j as f64 / np1;
    }
    let mut quad = 0.0;
    for j in 1..=n {
        for k in 1..=n {
            let s = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
            let (lo, hi) = (j.min(k), j.max(k));
            quad += s * (lo as f64) * (hi as f64 + 1.0) / (np1 * np2);
        }
    }
    let sn = if n % 2 == 0 { 1.0 } else { -1.0 };
    t * t * (1.0 + 4.0 * sn * lin + 4.0 * quad)
}

pub fn poisson_pmf(mean: f64, n: usize) -> f64 {
    let mut p = (-mean).exp();
    for k in 1..=n {
        p *= mean / k as f64;
    }
    p
}

/// Upper tail P(N > n), summed forward to avoid cancellation.
pub fn poisson_tail(mean: f64, n: usize) -> f64 {
    let mut term = poisson_pmf(mean, n);
    let mut tail = 0.0;
    for k in (n + 1)..(n + 400) {
        term *= mean / k as f64;
        tail += term;
        if term < 1e-300 {
            break;
        }
    }
    tail
}

/// Frequency information of the alternating-jump channel summed over the
/// record series, truncated once |Phi| <= t bounds the remainder below
/// rel_tol of the running total.
pub fn flip_omega_series_oracle(gamma: f64, t: f64, r2: f64, rel_tol: f64) -> f64 {
    let mean = gamma * t / 4.0;
    let mut total = 0.0;
    let mut p = (-mean).exp();
    let mut n = 0usize;
    loop {
        total += p * 4.0 * r2 * phase_second_moment(n, t);
        let tail = poisson_tail(mean, n) * 4.0 * r2 * t * t;
        if (tail < rel_tol * total && n >= 2) || n > 400 {
            break;
        }
        n += 1;
        p *= mean / n as f64;
    }
    total
}

/// Rate information carried by the jump-count statistics alone: the series
/// sum of p_n (n/gamma - t/4)^2 for a Poisson record distribution with mean
/// gamma t / 4. Converges to t/(4 gamma).
pub fn poisson_record_cfi(gamma: f64, t: f64) -> f64 {
    let mean = gamma * t / 4.0;
    let mut total = 0.0;
    let mut p = (-mean).exp();
    let mut n = 0usize;
    loop {
        let score = n as f64 / gamma - t / 4.0;
        total += p * score * score;
        // remaining terms are bounded by tail * max score^2 over the window
        let m = n + 400;
        let bound = poisson_tail(mean, n) * (m as f64 / gamma + t / 4.0).powi(2);
        if (bound < 1e-13 * total.max(1e-300) && n as f64 > mean) || n > 400 {
            break;
        }
        n += 1;
        p *= mean / n as f64;
    }
    total
}

// ---------------------------------------------------------------------------
// Acceptance grid

/// Decay-rate / horizon pairs: gamma in {0.1, 1, 10} crossed with
/// gamma t in {0.5, 2, 8}.
pub fn rate_horizon_grid() -> Vec<(f64, f64)> {
    let mut grid = Vec::new();
    for &gamma in &[0.1, 1.0, 10.0] {
        for &gt in &[0.5, 2.0, 8.0] {
            grid.push((gamma, gt / gamma));
        }
    }
    grid
}

/// Initial states with excited population in {0.25, 0.5, 0.9} and coherence
/// on the purity boundary |rho_ud|^2 = rho_uu rho_dd.
pub fn grid_states() -> Vec<DensityMatrix> {
    [0.25, 0.5, 0.9]
        .iter()
        .map(|&ruu: &f64| {
            let rud = (ruu * (1.0 - ruu)).sqrt();
            DensityMatrix::qubit(ruu, c64(rud, 0.0)).expect("grid state")
        })
        .collect()
}
