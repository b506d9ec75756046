//! Estimation of a channel parameter from monitoring records.
//!
//! A posterior over a 1-D parameter grid is updated with exact record
//! log-likelihoods, then reduced to a point estimate: the likelihood peak
//! (grid argmax plus golden-section refinement) or the posterior mean with
//! its spread. `crb_harness` closes the loop by checking the empirical
//! scatter of repeated estimates against 1/sqrt(nu * information).

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channels::{self, ChannelError, ChannelKind, ChannelSpec, JumpTimes, Parameter};
use crate::fisher::{self, FisherError, ParametrizedState};
use crate::linalg::inner;
use crate::mcsim;
use crate::qecmon::{self, QecError, SyndromeRecord};
use crate::qstate::{self, DensityMatrix, QStateError, UnnormalizedState};
use crate::{C64, CMat};

/// Fewest grid points a posterior may hold.
pub const MIN_GRID_POINTS: usize = 64;

/// Half-width of the default Gaussian-prior grid, in units of the prior width.
const GAUSSIAN_GRID_SIGMAS: f64 = 8.0;

/// Golden-section tolerance as a fraction of the grid span.
const MLE_REFINE_TOL: f64 = 1e-8;

/// Grid resolution used by the saturation harness.
const HARNESS_GRID_POINTS: usize = 201;

/// Harness grid half-width in units of the predicted estimator deviation.
const HARNESS_GRID_SIGMAS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("posterior grid needs at least {MIN_GRID_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("bad grid bounds [{lo}, {hi}]")]
    BadBounds { lo: f64, hi: f64 },
    #[error("bad prior: {0}")]
    BadPrior(String),
    #[error("bad estimation model: {0}")]
    BadModel(String),
    #[error("record impossible at the evaluated parameter: {0}")]
    ZeroLikelihood(String),
    #[error("posterior vanishes on the whole grid")]
    AllZero,
    #[error("posterior maximum sits on the grid edge at theta = {theta}")]
    BoundaryMaximum { theta: f64 },
    #[error("record does not fit the monitoring scheme: {0}")]
    RecordMismatch(String),
    #[error("the monitoring scheme carries no information about the parameter")]
    NoInformation,
    #[error("channel evaluation failed: {0}")]
    Channel(#[from] ChannelError),
    #[error("information calculation failed: {0}")]
    Fisher(#[from] FisherError),
    #[error("state algebra failed: {0}")]
    State(#[from] QStateError),
    #[error("syndrome evaluation failed: {0}")]
    Syndrome(#[from] QecError),
}

fn zero(detail: impl Into<String>) -> EstimateError {
    EstimateError::ZeroLikelihood(detail.into())
}

/// Prior knowledge about the parameter before any record arrives.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Flat { lo: f64, hi: f64 },
    Gaussian { center: f64, width: f64 },
}

impl Prior {
    /// Unnormalized log density; minus infinity outside a flat prior's support.
    pub fn log_density(&self, theta: f64) -> f64 {
        match *self {
            Prior::Flat { lo, hi } => {
                if theta < lo || theta > hi {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            Prior::Gaussian { center, width } => {
                let z = (theta - center) / width;
                -0.5 * z * z
            }
        }
    }

    fn validate(&self) -> Result<(), EstimateError> {
        match *self {
            Prior::Flat { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(EstimateError::BadBounds { lo, hi });
                }
            }
            Prior::Gaussian { center, width } => {
                if !center.is_finite() || !width.is_finite() || width <= 0.0 {
                    return Err(EstimateError::BadPrior(format!(
                        "Gaussian center {center}, width {width}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn grid_bounds(&self) -> (f64, f64) {
        match *self {
            Prior::Flat { lo, hi } => (lo, hi),
            Prior::Gaussian { center, width } => (
                center - GAUSSIAN_GRID_SIGMAS * width,
                center + GAUSSIAN_GRID_SIGMAS * width,
            ),
        }
    }
}

/// Posterior over an ascending parameter grid. The stored log densities are
/// kept normalized: sum(exp(log_density)) = 1 over the grid points.
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    prior: Prior,
    theta: Vec<f64>,
    log_density: Vec<f64>,
}

impl PosteriorGrid {
    pub fn from_prior(prior: Prior, n_points: usize) -> Result<Self, EstimateError> {
        prior.validate()?;
        if n_points < MIN_GRID_POINTS {
            return Err(EstimateError::TooFewPoints(n_points));
        }
        let (lo, hi) = prior.grid_bounds();
        let step = (hi - lo) / (n_points - 1) as f64;
        // Last point pinned to hi so rounding cannot push it off the support.
        let theta: Vec<f64> = (0..n_points)
            .map(|i| if i + 1 == n_points { hi } else { lo + step * i as f64 })
            .collect();
        let log_density = theta.iter().map(|&th| prior.log_density(th)).collect();
        let mut grid = PosteriorGrid { prior, theta, log_density };
        grid.renormalize()?;
        Ok(grid)
    }

    pub fn flat(lo: f64, hi: f64, n_points: usize) -> Result<Self, EstimateError> {
        Self::from_prior(Prior::Flat { lo, hi }, n_points)
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn theta_values(&self) -> &[f64] {
        &self.theta
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.theta[self.theta.len() - 1] - self.theta[0]
    }

    /// Per-point posterior masses; they sum to one.
    pub fn normalized_density(&self) -> Vec<f64> {
        self.log_density.iter().map(|&l| l.exp()).collect()
    }

    fn renormalize(&mut self) -> Result<(), EstimateError> {
        let lse = log_sum_exp(&self.log_density);
        if !lse.is_finite() {
            return Err(EstimateError::AllZero);
        }
        for v in &mut self.log_density {
            *v -= lse;
        }
        Ok(())
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// What the monitoring run writes down about each probe cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum MonitoringScheme {
    /// Jump times only; the final state is discarded.
    JumpTimings,
    /// Jump times plus a projective measurement on the conditional state.
    JumpsPlusFinalMeasurement,
    /// Projective measurement on the unconditional final state; no timings.
    FinalMeasurementOnly,
    /// Stroboscopic parity readout every `delta`, spin-flip channel only.
    SyndromeStream { delta: f64 },
}

/// Channel, target parameter, probe preparation, cycle length and readout
/// scheme. The `spec` holds the generating (true) parameter values; the
/// component selected by `parameter` is the estimation target.
#[derive(Debug, Clone)]
pub struct EstimationModel {
    pub spec: ChannelSpec,
    pub parameter: Parameter,
    pub rho0: DensityMatrix,
    pub t: f64,
    pub scheme: MonitoringScheme,
}

impl EstimationModel {
    pub fn new(
        spec: ChannelSpec,
        parameter: Parameter,
        rho0: DensityMatrix,
        t: f64,
        scheme: MonitoringScheme,
    ) -> Result<Self, EstimateError> {
        if !t.is_finite() || t <= 0.0 {
            return Err(EstimateError::BadModel(format!("cycle length {t}")));
        }
        if let MonitoringScheme::SyndromeStream { delta } = scheme {
            if spec.kind != ChannelKind::SpinFlip {
                return Err(EstimateError::BadModel(
                    "syndrome streams monitor the spin-flip channel".into(),
                ));
            }
            qecmon::checked_intervals(t, delta)?;
        }
        Ok(EstimationModel { spec, parameter, rho0, t, scheme })
    }

    /// Generating value of the estimated parameter.
    pub fn true_theta(&self) -> f64 {
        match self.parameter {
            Parameter::Omega => self.spec.omega,
            Parameter::Gamma => self.spec.gamma,
        }
    }

    /// Channel at a trial parameter value; values outside the physical range
    /// (negative rates) count as impossible rather than as hard errors.
    fn spec_at(&self, theta: f64) -> Result<ChannelSpec, EstimateError> {
        let (omega, gamma) = match self.parameter {
            Parameter::Omega => (theta, self.spec.gamma),
            Parameter::Gamma => (self.spec.omega, theta),
        };
        ChannelSpec::new(self.spec.kind, omega, gamma)
            .map_err(|e| zero(format!("no channel at theta = {theta}: {e}")))
    }
}

/// One recorded probe cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum MonitoringRecord {
    Jumps(JumpTimes),
    JumpsWithOutcome { jumps: JumpTimes, outcome: usize },
    FinalOutcome { outcome: usize },
    Syndrome(SyndromeRecord),
}

/// Expectation of a Hermitian matrix in a (normalized) vector.
fn expectation(m: &CMat, e: &[C64]) -> f64 {
    inner(e, &m.matvec(e)).re
}

/// Normalized state the final projective measurement acts on, at a trial
/// parameter value. `jumps` is required for the conditional-state scheme and
/// ignored by the unconditional one.
fn measured_density(
    model: &EstimationModel,
    jumps: Option<&JumpTimes>,
    theta: f64,
) -> Result<DensityMatrix, EstimateError> {
    let spec = model.spec_at(theta)?;
    match model.scheme {
        MonitoringScheme::FinalMeasurementOnly => {
            Ok(channels::nonselective_state(&spec, &model.rho0, model.t))
        }
        MonitoringScheme::JumpsPlusFinalMeasurement => {
            let jumps = jumps
                .ok_or_else(|| EstimateError::RecordMismatch("jump record required".into()))?;
            let st = channels::jump_trajectory_state(&spec, &model.rho0, jumps)?;
            let (dm, weight) = st.normalize()?;
            if weight <= 0.0 {
                return Err(zero("conditional state has zero weight"));
            }
            Ok(dm)
        }
        _ => Err(EstimateError::RecordMismatch(
            "scheme has no final measurement".into(),
        )),
    }
}

/// Eigenbasis of the symmetric-logarithmic-derivative operator of the
/// measured-state family, evaluated at `theta_sld`. Column k of the result is
/// the k-th projector direction.
pub fn sld_basis_at(
    model: &EstimationModel,
    jumps: Option<&JumpTimes>,
    theta_sld: f64,
) -> Result<Vec<Vec<C64>>, EstimateError> {
    let rho = measured_density(model, jumps, theta_sld)?;
    let h = fisher::fd_default_step(theta_sld);
    let up = measured_density(model, jumps, theta_sld + h)?;
    let dn = measured_density(model, jumps, theta_sld - h)?;
    let drho = (up.matrix() - dn.matrix()).scale_re(0.5 / h);
    let d = rho.dim();
    let state = ParametrizedState::density(rho, drho)?;
    let l = fisher::sld(&state)?;
    let (_, vectors) = qstate::eig_hermitian(&l)?;
    Ok((0..d)
        .map(|k| (0..d).map(|i| vectors[(i, k)]).collect())
        .collect())
}

/// Measurement basis the monitoring run actually uses: the SLD eigenbasis at
/// the generating parameter value.
fn measurement_basis(
    model: &EstimationModel,
    jumps: Option<&JumpTimes>,
) -> Result<Vec<Vec<C64>>, EstimateError> {
    sld_basis_at(model, jumps, model.true_theta())
}

/// Log density of the bare jump record. Impossible records are reported, not
/// mapped to minus infinity.
fn timing_log_density(
    spec: &ChannelSpec,
    rho0: &DensityMatrix,
    jumps: &JumpTimes,
) -> Result<f64, EstimateError> {
    let n = jumps.count();
    let t = jumps.horizon();
    match spec.kind {
        ChannelKind::Relaxation => match n {
            0 => {
                let p = rho0.rho_upup() * (-spec.gamma * t).exp() + rho0.rho_downdown();
                if p <= 0.0 {
                    Err(zero("no-decay record has zero survival probability"))
                } else {
                    Ok(p.ln())
                }
            }
            1 => {
                let ruu = rho0.rho_upup();
                if spec.gamma <= 0.0 || ruu <= 0.0 {
                    Err(zero("decay recorded where the decay density vanishes"))
                } else {
                    Ok(spec.gamma.ln() + ruu.ln() - spec.gamma * jumps.times()[0])
                }
            }
            _ => Err(zero("relaxation admits at most one jump per cycle")),
        },
        ChannelKind::SpinFlip | ChannelKind::Dephasing => {
            let rate = spec.gamma / 4.0;
            if n > 0 && rate <= 0.0 {
                return Err(zero("jumps recorded at zero jump rate"));
            }
            // Guard the n = 0, rate = 0 corner: 0 * ln(0) must stay 0.
            let jump_part = if n == 0 { 0.0 } else { n as f64 * rate.ln() };
            Ok(jump_part - rate * t)
        }
    }
}

/// Record with its measurement direction resolved, ready for repeated
/// likelihood evaluation across a grid.
enum PreparedRecord<'a> {
    Timing { jumps: &'a JumpTimes },
    TimingPlusOutcome { jumps: &'a JumpTimes, evec: Vec<C64> },
    Outcome { evec: Vec<C64> },
    Syndrome { record: &'a SyndromeRecord },
}

/// Shared per-theta work: the unconditional state for outcome-only records,
/// or the parity maps for syndrome chains.
enum ThetaContext {
    None,
    FinalState(DensityMatrix),
    ParityMaps(crate::qstate::Superoperator, crate::qstate::Superoperator),
}

struct BatchEvaluator<'a> {
    model: &'a EstimationModel,
    prepared: Vec<PreparedRecord<'a>>,
}

impl<'a> BatchEvaluator<'a> {
    fn new(
        model: &'a EstimationModel,
        records: &'a [MonitoringRecord],
    ) -> Result<Self, EstimateError> {
        let prepared = records
            .iter()
            .map(|r| Self::prepare(model, r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BatchEvaluator { model, prepared })
    }

    fn check_horizon(model: &EstimationModel, jumps: &JumpTimes) -> Result<(), EstimateError> {
        if (jumps.horizon() - model.t).abs() > 1e-9 * model.t.max(1.0) {
            return Err(EstimateError::RecordMismatch(format!(
                "record horizon {} differs from the model cycle length {}",
                jumps.horizon(),
                model.t
            )));
        }
        Ok(())
    }

    fn prepare(
        model: &'a EstimationModel,
        record: &'a MonitoringRecord,
    ) -> Result<PreparedRecord<'a>, EstimateError> {
        match (&model.scheme, record) {
            (MonitoringScheme::JumpTimings, MonitoringRecord::Jumps(jumps)) => {
                Self::check_horizon(model, jumps)?;
                Ok(PreparedRecord::Timing { jumps })
            }
            (
                MonitoringScheme::JumpsPlusFinalMeasurement,
                MonitoringRecord::JumpsWithOutcome { jumps, outcome },
            ) => {
                Self::check_horizon(model, jumps)?;
                let basis = measurement_basis(model, Some(jumps))?;
                let evec = basis.get(*outcome).cloned().ok_or_else(|| {
                    EstimateError::RecordMismatch(format!(
                        "outcome {outcome} out of range for a {}-outcome measurement",
                        basis.len()
                    ))
                })?;
                Ok(PreparedRecord::TimingPlusOutcome { jumps, evec })
            }
            (MonitoringScheme::FinalMeasurementOnly, MonitoringRecord::FinalOutcome { outcome }) => {
                let basis = measurement_basis(model, None)?;
                let evec = basis.get(*outcome).cloned().ok_or_else(|| {
                    EstimateError::RecordMismatch(format!(
                        "outcome {outcome} out of range for a {}-outcome measurement",
                        basis.len()
                    ))
                })?;
                Ok(PreparedRecord::Outcome { evec })
            }
            (MonitoringScheme::SyndromeStream { delta }, MonitoringRecord::Syndrome(record)) => {
                if (record.delta() - delta).abs() > 1e-12 * delta.max(1.0) {
                    return Err(EstimateError::RecordMismatch(format!(
                        "record interval {} differs from the scheme interval {delta}",
                        record.delta()
                    )));
                }
                let n = qecmon::checked_intervals(model.t, *delta)? as usize;
                if record.len() != n {
                    return Err(EstimateError::RecordMismatch(format!(
                        "record holds {} outcomes, the cycle has {n} intervals",
                        record.len()
                    )));
                }
                Ok(PreparedRecord::Syndrome { record })
            }
            (scheme, record) => Err(EstimateError::RecordMismatch(format!(
                "record {record:?} under scheme {scheme:?}"
            ))),
        }
    }

    fn context(&self, spec: &ChannelSpec) -> ThetaContext {
        match self.model.scheme {
            MonitoringScheme::FinalMeasurementOnly => ThetaContext::FinalState(
                channels::nonselective_state(spec, &self.model.rho0, self.model.t),
            ),
            MonitoringScheme::SyndromeStream { delta } => {
                let (plus, minus) = qecmon::syndrome_maps(spec.omega, spec.gamma, delta);
                ThetaContext::ParityMaps(plus, minus)
            }
            _ => ThetaContext::None,
        }
    }

    fn one(
        &self,
        prepared: &PreparedRecord<'_>,
        spec: &ChannelSpec,
        ctx: &ThetaContext,
    ) -> Result<f64, EstimateError> {
        match (prepared, ctx) {
            (PreparedRecord::Timing { jumps }, _) => {
                timing_log_density(spec, &self.model.rho0, jumps)
            }
            (PreparedRecord::TimingPlusOutcome { jumps, evec }, _) => {
                // Joint density: the unnormalized conditional state carries
                // the record weight in its trace, so one expectation value
                // gives timing density times Born probability.
                timing_log_density(spec, &self.model.rho0, jumps)?;
                let st = channels::jump_trajectory_state(spec, &self.model.rho0, jumps)?;
                let p = expectation(st.matrix(), evec);
                if p <= 0.0 {
                    Err(zero("measured projector has zero weight"))
                } else {
                    Ok(p.ln())
                }
            }
            (PreparedRecord::Outcome { evec }, ThetaContext::FinalState(rho_bar)) => {
                let p = expectation(rho_bar.matrix(), evec);
                if p <= 0.0 {
                    Err(zero("measured projector has zero weight"))
                } else {
                    Ok(p.ln())
                }
            }
            (PreparedRecord::Syndrome { record }, ThetaContext::ParityMaps(plus, minus)) => {
                let mut st = UnnormalizedState::from_density(&self.model.rho0);
                // Outcomes hold the running parity; the map at each step is
                // picked by whether the parity switched, starting from +1.
                let mut prev: i8 = 1;
                for &lam in record.outcomes() {
                    st = if lam == prev { plus.apply(&st) } else { minus.apply(&st) };
                    prev = lam;
                }
                let p = st.trace();
                if p <= 0.0 {
                    Err(zero("parity sequence has zero probability"))
                } else {
                    Ok(p.ln())
                }
            }
            _ => Err(EstimateError::RecordMismatch(
                "record kind and per-theta context disagree".into(),
            )),
        }
    }

    /// Total log-likelihood of all records at a trial parameter value.
    fn log_likelihood_at(&self, theta: f64) -> Result<f64, EstimateError> {
        let spec = self.model.spec_at(theta)?;
        let ctx = self.context(&spec);
        let mut acc = 0.0;
        for p in &self.prepared {
            acc += self.one(p, &spec, &ctx)?;
        }
        Ok(acc)
    }
}

/// Exact log-probability (log-density in the jump times) of one record.
pub fn log_likelihood(
    record: &MonitoringRecord,
    theta: f64,
    model: &EstimationModel,
) -> Result<f64, EstimateError> {
    BatchEvaluator::new(model, std::slice::from_ref(record))?.log_likelihood_at(theta)
}

/// Pointwise Bayesian update with one record.
pub fn update_posterior(
    grid: &PosteriorGrid,
    record: &MonitoringRecord,
    model: &EstimationModel,
) -> Result<PosteriorGrid, EstimateError> {
    update_posterior_batch(grid, std::slice::from_ref(record), model)
}

/// Bayesian update with a batch of records; equals the sequential updates up
/// to floating-point roundoff. Grid points where some record is impossible
/// drop to zero mass; if every point drops, the update reports `AllZero`.
pub fn update_posterior_batch(
    grid: &PosteriorGrid,
    records: &[MonitoringRecord],
    model: &EstimationModel,
) -> Result<PosteriorGrid, EstimateError> {
    let batch = BatchEvaluator::new(model, records)?;
    let mut log_density = Vec::with_capacity(grid.len());
    for (&th, &ld0) in grid.theta.iter().zip(&grid.log_density) {
        let ld = if ld0 == f64::NEG_INFINITY {
            ld0
        } else {
            match batch.log_likelihood_at(th) {
                Ok(l) => ld0 + l,
                Err(EstimateError::ZeroLikelihood(_)) => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            }
        };
        log_density.push(ld);
    }
    let mut out = PosteriorGrid {
        prior: grid.prior.clone(),
        theta: grid.theta.clone(),
        log_density,
    };
    out.renormalize()?;
    Ok(out)
}

/// Golden-section maximization on [a, b]. Ties drift toward the lower end.
fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Likelihood peak: grid argmax (ties break to the lower theta) refined by a
/// golden-section search of the continuous log posterior inside the
/// bracketing cell. An argmax on the grid edge is flagged, not refined.
pub fn mle(
    grid: &PosteriorGrid,
    log_posterior: impl Fn(f64) -> f64,
) -> Result<f64, EstimateError> {
    let ld = &grid.log_density;
    let mut best = 0usize;
    for i in 1..ld.len() {
        if ld[i] > ld[best] {
            best = i;
        }
    }
    if !ld[best].is_finite() {
        return Err(EstimateError::AllZero);
    }
    if best == 0 || best + 1 == ld.len() {
        return Err(EstimateError::BoundaryMaximum { theta: grid.theta[best] });
    }
    let tol = MLE_REFINE_TOL * grid.span();
    Ok(golden_max(
        grid.theta[best - 1],
        grid.theta[best + 1],
        tol,
        log_posterior,
    ))
}

/// Posterior mean and spread: the spread is the root of the second posterior
/// moment about the mean.
pub fn bayes(grid: &PosteriorGrid) -> (f64, f64) {
    let p = grid.normalized_density();
    let mean: f64 = grid.theta.iter().zip(&p).map(|(&th, &q)| th * q).sum();
    (mean, posterior_width_about(grid, mean))
}

/// Root of the second posterior moment about an arbitrary center; the spread
/// attached to a point estimate.
pub fn posterior_width_about(grid: &PosteriorGrid, center: f64) -> f64 {
    let p = grid.normalized_density();
    grid.theta
        .iter()
        .zip(&p)
        .map(|(&th, &q)| (th - center) * (th - center) * q)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    MaxLikelihood,
    Bayes,
}

/// Records, the estimator applied to them, and the result.
#[derive(Debug, Clone)]
pub struct EstimationRun {
    pub records: Vec<MonitoringRecord>,
    pub estimator: EstimatorKind,
    pub estimate: f64,
    pub width: f64,
    /// Generating value, when the records are synthetic.
    pub true_theta: Option<f64>,
}

/// Full pipeline: update the grid with all records, then reduce to a point
/// estimate and its posterior spread.
pub fn run_estimation(
    model: &EstimationModel,
    grid0: &PosteriorGrid,
    records: &[MonitoringRecord],
    estimator: EstimatorKind,
) -> Result<EstimationRun, EstimateError> {
    let grid = update_posterior_batch(grid0, records, model)?;
    let (estimate, width) = match estimator {
        EstimatorKind::Bayes => bayes(&grid),
        EstimatorKind::MaxLikelihood => {
            let batch = BatchEvaluator::new(model, records)?;
            let prior = grid.prior.clone();
            let objective = |th: f64| {
                let like = match batch.log_likelihood_at(th) {
                    Ok(l) => l,
                    Err(_) => f64::NEG_INFINITY,
                };
                prior.log_density(th) + like
            };
            let th = mle(&grid, objective)?;
            (th, posterior_width_about(&grid, th))
        }
    };
    debug_assert!(
        estimate >= grid.theta[0] && estimate <= grid.theta[grid.len() - 1],
        "estimate escaped the grid"
    );
    Ok(EstimationRun {
        records: records.to_vec(),
        estimator,
        estimate,
        width,
        true_theta: None,
    })
}

/// Classical information of the projective measurement in the SLD basis taken
/// at `theta_sld`, evaluated on the measured-state family at `theta`. With
/// matched arguments this recovers the family's quantum information; a
/// mismatched SLD point quantifies how much the detuned basis loses.
pub fn measurement_cfi(
    model: &EstimationModel,
    jumps: Option<&JumpTimes>,
    theta_sld: f64,
    theta: f64,
) -> Result<f64, EstimateError> {
    let basis = sld_basis_at(model, jumps, theta_sld)?;
    let rho = measured_density(model, jumps, theta)?;
    let h = fisher::fd_default_step(theta);
    let up = measured_density(model, jumps, theta + h)?;
    let dn = measured_density(model, jumps, theta - h)?;
    let drho = (up.matrix() - dn.matrix()).scale_re(0.5 / h);
    let probs: Vec<f64> = basis
        .iter()
        .map(|e| expectation(rho.matrix(), e).max(0.0))
        .collect();
    let derivs: Vec<f64> = basis.iter().map(|e| expectation(&drho, e)).collect();
    let dist = fisher::OutcomeDistribution::discrete(probs, derivs)?;
    Ok(fisher::cfi(&dist)?)
}

/// Draw one synthetic record. Streams 2k and 2k+1 of the seeded generator
/// feed trajectory k's jump sampling and its measurement outcome, so records
/// are reproducible and independent across indices.
pub fn sample_monitoring_record(
    model: &EstimationModel,
    seed: u64,
    index: u64,
) -> Result<MonitoringRecord, EstimateError> {
    match &model.scheme {
        MonitoringScheme::JumpTimings => {
            let tr = mcsim::sample_trajectory(&model.spec, &model.rho0, model.t, seed, 2 * index);
            Ok(MonitoringRecord::Jumps(tr.jumps))
        }
        MonitoringScheme::JumpsPlusFinalMeasurement => {
            let tr = mcsim::sample_trajectory(&model.spec, &model.rho0, model.t, seed, 2 * index);
            let basis = measurement_basis(model, Some(&tr.jumps))?;
            let outcome = draw_outcome(tr.final_state.matrix(), &basis, seed, 2 * index + 1);
            Ok(MonitoringRecord::JumpsWithOutcome { jumps: tr.jumps, outcome })
        }
        MonitoringScheme::FinalMeasurementOnly => {
            let rho_bar = measured_density(model, None, model.true_theta())?;
            let basis = measurement_basis(model, None)?;
            let outcome = draw_outcome(rho_bar.matrix(), &basis, seed, 2 * index + 1);
            Ok(MonitoringRecord::FinalOutcome { outcome })
        }
        MonitoringScheme::SyndromeStream { delta } => {
            let n = qecmon::checked_intervals(model.t, *delta)? as usize;
            let (record, _) = qecmon::simulate_syndrome_record(
                &model.rho0,
                *delta,
                n,
                model.spec.omega,
                model.spec.gamma,
                seed,
                2 * index,
            );
            Ok(MonitoringRecord::Syndrome(record))
        }
    }
}

fn draw_outcome(rho: &CMat, basis: &[Vec<C64>], seed: u64, stream: u64) -> usize {
    let mut rng = mcsim::trajectory_rng(seed, stream);
    let v: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, e) in basis.iter().enumerate() {
        acc += expectation(rho, e).max(0.0);
        if v < acc {
            return k;
        }
    }
    basis.len() - 1
}

/// Information one record carries under the scheme: the timing part, the
/// full per-trajectory total, the unconditional-state benchmark, or the
/// parity-stream information at the finite readout interval.
pub fn per_record_information(model: &EstimationModel) -> Result<f64, EstimateError> {
    match &model.scheme {
        MonitoringScheme::SyndromeStream { delta } => match model.parameter {
            // Parity statistics never see the frequency: populations and
            // coherences evolve in closed, separate blocks.
            Parameter::Omega => Err(EstimateError::NoInformation),
            Parameter::Gamma => {
                Ok(qecmon::finite_delta_cfi_gamma(model.spec.gamma, model.t, *delta)?)
            }
        },
        scheme => {
            let row =
                channels::table1_row(&model.spec, model.parameter, &model.rho0, model.t)?;
            let info = match scheme {
                MonitoringScheme::JumpTimings => row.cfi_timings,
                MonitoringScheme::JumpsPlusFinalMeasurement => row.total,
                MonitoringScheme::FinalMeasurementOnly => row.conventional_qfi,
                MonitoringScheme::SyndromeStream { .. } => unreachable!(),
            };
            Ok(info)
        }
    }
}

/// Estimator scatter compared against the information bounds.
#[derive(Debug, Clone, Copy)]
pub struct CrbReport {
    pub true_theta: f64,
    pub nu: usize,
    pub replicates: usize,
    pub estimator: EstimatorKind,
    /// Per-record information available to the scheme.
    pub per_record_information: f64,
    /// Per-record information of the unconditional-state benchmark.
    pub conventional_information: f64,
    pub estimate_mean: f64,
    /// Sample standard deviation of the estimates across replicates.
    pub estimate_stderr: f64,
    /// Mean posterior spread reported by the individual runs.
    pub mean_posterior_width: f64,
    /// 1/sqrt(nu * per_record_information).
    pub predicted_stderr: f64,
    /// 1/sqrt(nu * conventional_information).
    pub conventional_stderr: f64,
}

/// Repeat the whole estimation `replicates` times at `nu` records each and
/// compare the scatter of the point estimates with the information bounds.
/// Replicate r draws record i from global index r * nu + i, so worker count
/// never changes the data.
pub fn crb_harness(
    model: &EstimationModel,
    nu: usize,
    replicates: usize,
    estimator: EstimatorKind,
    seed: u64,
) -> Result<CrbReport, EstimateError> {
    if nu == 0 || replicates < 2 {
        return Err(EstimateError::BadModel(format!(
            "harness needs nu >= 1 and replicates >= 2, got nu = {nu}, replicates = {replicates}"
        )));
    }
    let info = per_record_information(model)?;
    if !info.is_finite() || info <= 0.0 {
        return Err(EstimateError::NoInformation);
    }
    let conventional = match model.scheme {
        MonitoringScheme::FinalMeasurementOnly => info,
        _ => {
            channels::table1_row(&model.spec, model.parameter, &model.rho0, model.t)?
                .conventional_qfi
        }
    };
    let theta_star = model.true_theta();
    let sigma = 1.0 / (nu as f64 * info).sqrt();
    let half = HARNESS_GRID_SIGMAS * sigma;
    let grid0 = PosteriorGrid::flat(theta_star - half, theta_star + half, HARNESS_GRID_POINTS)?;
    let results: Vec<(f64, f64)> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64), EstimateError> {
            let records: Vec<MonitoringRecord> = (0..nu)
                .map(|i| sample_monitoring_record(model, seed, (r * nu + i) as u64))
                .collect::<Result<_, _>>()?;
            let run = run_estimation(model, &grid0, &records, estimator)?;
            Ok((run.estimate, run.width))
        })
        .collect::<Result<_, _>>()?;
    let n = replicates as f64;
    let estimate_mean = results.iter().map(|r| r.0).sum::<f64>() / n;
    let var = results
        .iter()
        .map(|r| (r.0 - estimate_mean) * (r.0 - estimate_mean))
        .sum::<f64>()
        / (n - 1.0);
    let mean_posterior_width = results.iter().map(|r| r.1).sum::<f64>() / n;
    Ok(CrbReport {
        true_theta: theta_star,
        nu,
        replicates,
        estimator,
        per_record_information: info,
        conventional_information: conventional,
        estimate_mean,
        estimate_stderr: var.sqrt(),
        mean_posterior_width,
        predicted_stderr: sigma,
        conventional_stderr: 1.0 / (nu as f64 * conventional).sqrt(),
    })
}
