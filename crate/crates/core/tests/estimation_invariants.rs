//! End-to-end estimation checks: the estimator scatter has to track the
//! information bounds, and the monitored scheme has to beat the
//! unconditional benchmark by the predicted margin.

use trajfisher_core::c64;
use trajfisher_core::channels::{ChannelKind, ChannelSpec, Parameter};
use trajfisher_core::estimate::{
    crb_harness, EstimationModel, EstimatorKind, MonitoringScheme,
};
use trajfisher_core::qstate::DensityMatrix;

fn plus_state() -> DensityMatrix {
    DensityMatrix::qubit(0.5, c64(0.5, 0.0)).unwrap()
}

#[test]
fn dephasing_frequency_scatter_sits_on_the_bound() {
    let spec = ChannelSpec::new(ChannelKind::Dephasing, 1.0, 0.8).unwrap();
    let model = EstimationModel::new(
        spec,
        Parameter::Omega,
        plus_state(),
        2.0,
        MonitoringScheme::JumpsPlusFinalMeasurement,
    )
    .unwrap();
    let report = crb_harness(&model, 2000, 100, EstimatorKind::MaxLikelihood, 5).unwrap();

    // dephasing trajectories all carry 4 t^2 |coh|^2
    assert!((report.per_record_information - 4.0).abs() < 1e-10);
    assert!(
        (report.estimate_stderr - report.predicted_stderr).abs()
            <= 0.15 * report.predicted_stderr,
        "scatter {} vs bound {}",
        report.estimate_stderr,
        report.predicted_stderr
    );
    let mean_tol = 4.0 * report.predicted_stderr / (report.replicates as f64).sqrt();
    assert!(
        (report.estimate_mean - report.true_theta).abs() <= mean_tol,
        "bias {} at tolerance {}",
        report.estimate_mean - report.true_theta,
        mean_tol
    );
}

#[test]
fn monitoring_beats_the_unconditional_benchmark_at_the_predicted_ratio() {
    // decay channel at gamma t = 3, where discarding the record costs a
    // factor 1 / (rho_uu e^{-gamma t} + rho_dd) in information
    let gamma: f64 = 1.5;
    let t = 2.0;
    let rho0 = plus_state();
    let p_floor = 0.5 * (-gamma * t).exp() + 0.5;
    let spec = ChannelSpec::new(ChannelKind::Relaxation, 1.0, gamma).unwrap();

    let monitored = EstimationModel::new(
        spec.clone(),
        Parameter::Omega,
        rho0.clone(),
        t,
        MonitoringScheme::JumpsPlusFinalMeasurement,
    )
    .unwrap();
    let benchmark = EstimationModel::new(
        spec,
        Parameter::Omega,
        rho0,
        t,
        MonitoringScheme::FinalMeasurementOnly,
    )
    .unwrap();

    let rm = crb_harness(&monitored, 1500, 100, EstimatorKind::MaxLikelihood, 17).unwrap();
    let rb = crb_harness(&benchmark, 1500, 100, EstimatorKind::MaxLikelihood, 18).unwrap();

    // the predicted information ratio is exact
    let ratio = rm.per_record_information / rb.per_record_information;
    assert!(
        (ratio - 1.0 / p_floor).abs() < 1e-9 * ratio,
        "information ratio {ratio} vs 1/{p_floor}"
    );
    assert_eq!(rm.conventional_information, rb.per_record_information);

    // and both empirical scatters sit on their own bounds
    for (name, r) in [("monitored", &rm), ("benchmark", &rb)] {
        assert!(
            (r.estimate_stderr - r.predicted_stderr).abs() <= 0.15 * r.predicted_stderr,
            "{name}: scatter {} vs bound {}",
            r.estimate_stderr,
            r.predicted_stderr
        );
    }
}

#[test]
fn bayes_and_mle_agree_for_sharp_posteriors() {
    let spec = ChannelSpec::new(ChannelKind::SpinFlip, 1.0, 1.0).unwrap();
    let model = EstimationModel::new(
        spec,
        Parameter::Gamma,
        plus_state(),
        4.0,
        MonitoringScheme::JumpTimings,
    )
    .unwrap();
    let mle = crb_harness(&model, 3000, 40, EstimatorKind::MaxLikelihood, 23).unwrap();
    let bayes = crb_harness(&model, 3000, 40, EstimatorKind::Bayes, 23).unwrap();
    // same records, near-Gaussian posterior: the two estimators coincide to
    // a fraction of the scatter
    assert!(
        (mle.estimate_mean - bayes.estimate_mean).abs() < 0.2 * mle.predicted_stderr,
        "mle {} vs bayes {}",
        mle.estimate_mean,
        bayes.estimate_mean
    );
    assert!((mle.mean_posterior_width - bayes.mean_posterior_width).abs() < 0.05 * mle.mean_posterior_width);
}
