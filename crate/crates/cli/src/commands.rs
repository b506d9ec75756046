//! Table builders for the five subcommands.

use trajfisher_core::channels::{extraction_rate, extraction_rate_longtime, table1_row, RateMethod};
use trajfisher_core::estimate::{crb_harness, EstimationModel};
use trajfisher_core::mcsim::{sample_records, timing_score, trajectory_qfi};
use trajfisher_core::qecmon::{checked_intervals, finite_delta_cfi_gamma, finite_delta_qfi_omega};

use crate::config::{Command, RunConfig};
use crate::output::ResultTable;

pub fn run(config: &RunConfig) -> Result<ResultTable, String> {
    match config.command {
        Command::Analytic => analytic(config),
        Command::Simulate => simulate(config),
        Command::Rates => rates(config),
        Command::Qec => qec(config),
        Command::Estimate => estimate(config),
    }
}

fn table(config: &RunConfig, columns: Vec<&'static str>, rows: Vec<Vec<f64>>) -> ResultTable {
    ResultTable { metadata: config.metadata(), columns, rows }
}

fn analytic(config: &RunConfig) -> Result<ResultTable, String> {
    let spec = config.spec().map_err(|e| e.to_string())?;
    let rho0 = config.initial_state().map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(config.t_grid.len());
    for &t in &config.t_grid {
        let row = table1_row(&spec, config.parameter, &rho0, t).map_err(|e| e.to_string())?;
        rows.push(vec![
            config.gamma,
            t,
            config.rho_upup,
            config.rho_offdiag_abs,
            row.jumpless_qfi,
            row.jump_traj_qfi,
            row.cfi_timings,
            row.avg_traj_qfi,
            row.total,
            row.conventional_qfi,
            if row.caveats.is_empty() { 1.0 } else { 0.0 },
        ]);
    }
    Ok(table(
        config,
        vec![
            "gamma",
            "t",
            "rho_upup",
            "rho_offdiag_abs",
            "jumpless_qfi",
            "jump_traj_qfi",
            "timing_cfi",
            "avg_traj_qfi",
            "total_info",
            "benchmark_qfi",
            "benchmark_valid",
        ],
        rows,
    ))
}

fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn simulate(config: &RunConfig) -> Result<ResultTable, String> {
    let spec = config.spec().map_err(|e| e.to_string())?;
    let rho0 = config.initial_state().map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(config.t_grid.len());
    for &t in &config.t_grid {
        let row = table1_row(&spec, config.parameter, &rho0, t).map_err(|e| e.to_string())?;
        let records = sample_records(&spec, &rho0, t, config.n_samples, config.seed);
        let mut totals = Vec::with_capacity(records.len());
        let mut qfis = Vec::with_capacity(records.len());
        let mut scores2 = Vec::with_capacity(records.len());
        for record in &records {
            let q = trajectory_qfi(&spec, config.parameter, &rho0, &record.jumps);
            let s = timing_score(&spec, config.parameter, &rho0, &record.jumps);
            qfis.push(q);
            scores2.push(s * s);
            totals.push(q + s * s);
        }
        let (total_mc, total_se) = mean_se(&totals);
        let (qfi_mc, qfi_se) = mean_se(&qfis);
        let (cfi_mc, cfi_se) = mean_se(&scores2);
        rows.push(vec![
            config.gamma,
            t,
            config.n_samples as f64,
            row.total,
            total_mc,
            total_se,
            row.avg_traj_qfi,
            qfi_mc,
            qfi_se,
            row.cfi_timings,
            cfi_mc,
            cfi_se,
            row.conventional_qfi,
            if row.caveats.is_empty() { 1.0 } else { 0.0 },
        ]);
    }
    Ok(table(
        config,
        vec![
            "gamma",
            "t",
            "n_samples",
            "total_info",
            "total_mc",
            "total_mc_se",
            "avg_traj_qfi",
            "traj_qfi_mc",
            "traj_qfi_mc_se",
            "timing_cfi",
            "timing_cfi_mc",
            "timing_cfi_mc_se",
            "benchmark_qfi",
            "benchmark_valid",
        ],
        rows,
    ))
}

fn rates(config: &RunConfig) -> Result<ResultTable, String> {
    let spec = config.spec().map_err(|e| e.to_string())?;
    let mut rows = Vec::with_capacity(config.t_grid.len());
    for &t in &config.t_grid {
        let (mqt, mqt_state) =
            extraction_rate(&spec, config.parameter, RateMethod::Mqt, t).map_err(|e| e.to_string())?;
        let (conv, conv_state) = extraction_rate(&spec, config.parameter, RateMethod::Conventional, t)
            .map_err(|e| e.to_string())?;
        let longtime = extraction_rate_longtime(&spec, config.parameter, t);
        rows.push(vec![
            config.gamma,
            t,
            config.gamma * t,
            mqt,
            longtime.unwrap_or(f64::NAN),
            conv,
            mqt_state.rho_upup(),
            mqt_state.rho_updown().norm(),
            conv_state.rho_upup(),
            conv_state.rho_updown().norm(),
        ]);
    }
    Ok(table(
        config,
        vec![
            "gamma",
            "t",
            "gamma_t",
            "mqt_rate",
            "mqt_rate_longtime",
            "conventional_rate",
            "mqt_opt_rho_upup",
            "mqt_opt_rho_offdiag_abs",
            "conv_opt_rho_upup",
            "conv_opt_rho_offdiag_abs",
        ],
        rows,
    ))
}

fn qec(config: &RunConfig) -> Result<ResultTable, String> {
    let rho0 = config.initial_state().map_err(|e| e.to_string())?;
    let spec = config.spec().map_err(|e| e.to_string())?;
    let t = config.t_grid[0];
    let ideal_rate = t / (4.0 * config.gamma);
    let ideal_freq = table1_row(&spec, trajfisher_core::channels::Parameter::Omega, &rho0, t)
        .map_err(|e| e.to_string())?
        .total;
    let mut rows = Vec::with_capacity(config.delta_grid.len());
    for &delta in &config.delta_grid {
        let n = checked_intervals(t, delta).map_err(|e| e.to_string())?;
        let rate = finite_delta_cfi_gamma(config.gamma, t, delta).map_err(|e| e.to_string())?;
        let (freq, caveats) = finite_delta_qfi_omega(&rho0, config.omega, config.gamma, t, delta)
            .map_err(|e| e.to_string())?;
        rows.push(vec![
            delta,
            n as f64,
            config.gamma * delta / 4.0,
            rate,
            ideal_rate,
            freq,
            ideal_freq,
            if caveats.is_empty() { 1.0 } else { 0.0 },
        ]);
    }
    Ok(table(
        config,
        vec![
            "delta",
            "n_intervals",
            "zeta",
            "rate_info",
            "rate_info_ideal",
            "freq_info",
            "freq_info_ideal",
            "freq_form_valid",
        ],
        rows,
    ))
}

fn estimate(config: &RunConfig) -> Result<ResultTable, String> {
    let spec = config.spec().map_err(|e| e.to_string())?;
    let rho0 = config.initial_state().map_err(|e| e.to_string())?;
    let t = config.t_grid[0];
    let model = EstimationModel::new(spec, config.parameter, rho0, t, config.monitoring_scheme())
        .map_err(|e| e.to_string())?;
    let report = crb_harness(&model, config.nu, config.replicates, config.estimator, config.seed)
        .map_err(|e| e.to_string())?;
    let rows = vec![vec![
        report.nu as f64,
        report.replicates as f64,
        report.true_theta,
        report.per_record_information,
        report.conventional_information,
        report.estimate_mean,
        report.estimate_stderr,
        report.predicted_stderr,
        report.conventional_stderr,
        report.mean_posterior_width,
    ]];
    Ok(table(
        config,
        vec![
            "nu",
            "replicates",
            "true_theta",
            "per_record_information",
            "benchmark_information",
            "estimate_mean",
            "estimate_stderr",
            "predicted_stderr",
            "benchmark_stderr",
            "mean_posterior_width",
        ],
        rows,
    ))
}
