//! Flat `key = value` run configuration.
//!
//! Every diagnostic carries the line the offending value came from, so a
//! rejected file can be fixed without guessing. Keys that a command does not
//! use are ignored; unknown keys are errors.

use std::fmt;

use trajfisher_core::c64;
use trajfisher_core::channels::{ChannelKind, ChannelSpec, Parameter};
use trajfisher_core::estimate::{EstimatorKind, MonitoringScheme};
use trajfisher_core::qstate::DensityMatrix;

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), message: message.into() }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error at line {line}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analytic,
    Simulate,
    Rates,
    Qec,
    Estimate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analytic => "analytic",
            Command::Simulate => "simulate",
            Command::Rates => "rates",
            Command::Qec => "qec",
            Command::Estimate => "estimate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKey {
    Timings,
    TimingsPlusMeasurement,
    Measurement,
    Syndrome,
}

impl SchemeKey {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKey::Timings => "timings",
            SchemeKey::TimingsPlusMeasurement => "timings+measurement",
            SchemeKey::Measurement => "measurement",
            SchemeKey::Syndrome => "syndrome",
        }
    }
}

/// Fully resolved run description: config file plus command-line overrides
/// plus the environment seed fallback.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub channel: ChannelKind,
    pub parameter: Parameter,
    pub rho_upup: f64,
    pub rho_offdiag_abs: f64,
    pub rho_offdiag_phase: f64,
    pub omega: f64,
    pub gamma: f64,
    pub t_grid: Vec<f64>,
    t_was_grid: bool,
    pub delta_grid: Vec<f64>,
    delta_was_grid: bool,
    pub n_samples: usize,
    pub nu: usize,
    pub replicates: usize,
    pub scheme: SchemeKey,
    pub estimator: EstimatorKind,
    pub seed: u64,
    pub format: OutputFormat,
}

/// Per-command knobs supplied on the command line rather than in the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Raw {
    entries: Vec<(String, Entry)>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.iter_mut().find(|(k, _)| k == key).map(|(_, e)| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }
}

const KNOWN_KEYS: &[&str] = &[
    // emitted in metadata blocks; accepted so a metadata block is itself a
    // valid config file
    "generator",
    "command",
    "channel",
    "parameter",
    "rho_upup",
    "rho_offdiag_abs",
    "rho_offdiag_phase",
    "omega",
    "gamma",
    "t",
    "t_grid",
    "delta",
    "delta_grid",
    "n_samples",
    "nu",
    "replicates",
    "scheme",
    "estimator",
    "seed",
    "format",
];

fn parse_raw(text: &str) -> Result<Raw, ConfigError> {
    let mut entries: Vec<(String, Entry)> = Vec::new();
    for (ix, full_line) in text.lines().enumerate() {
        let line_no = ix + 1;
        let line = match full_line.find('#') {
            Some(pos) => &full_line[..pos],
            None => full_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(line_no, format!("expected `key = value`, got `{line}`")));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::at(line_no, format!("unknown key `{key}`")));
        }
        if let Some((_, prev)) = entries.iter().find(|(k, _)| *k == key) {
            return Err(ConfigError::at(
                line_no,
                format!("`{key}` already set on line {}", prev.line),
            ));
        }
        entries.push((key, Entry { line: line_no, value, used: false }));
    }
    Ok(Raw { entries })
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| {
        ConfigError::at(line, format!("`{key}` must be a number, got `{value}`"))
    })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|_| {
        ConfigError::at(line, format!("`{key}` must be a non-negative integer, got `{value}`"))
    })
}

fn parse_grid(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    let grid: Vec<f64> = value
        .split(',')
        .map(|s| parse_f64(line, key, s.trim()))
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err(ConfigError::at(line, format!("`{key}` must list at least one value")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(ConfigError::at(line, format!("`{key}` entries must be positive")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::at(line, format!("`{key}` must be strictly ascending")));
    }
    Ok(grid)
}

impl RunConfig {
    pub fn build(
        command: Command,
        text: &str,
        overrides: &Overrides,
        env_seed: Option<&str>,
    ) -> Result<RunConfig, ConfigError> {
        let mut raw = parse_raw(text)?;

        raw.take("generator");
        if let Some((line, value)) = raw.take("command") {
            if value != command.name() {
                return Err(ConfigError::at(
                    line,
                    format!(
                        "config was written for `{value}` but `{}` was invoked",
                        command.name()
                    ),
                ));
            }
        }

        let (ch_line, ch_value) = raw
            .take("channel")
            .ok_or_else(|| ConfigError::general("missing required key `channel`"))?;
        let channel = match ch_value.as_str() {
            "relaxation" => ChannelKind::Relaxation,
            "flip" => ChannelKind::SpinFlip,
            "dephasing" => ChannelKind::Dephasing,
            other => {
                return Err(ConfigError::at(
                    ch_line,
                    format!("`channel` must be relaxation, flip, or dephasing, got `{other}`"),
                ))
            }
        };

        let (par_line, par_value) = raw
            .take("parameter")
            .ok_or_else(|| ConfigError::general("missing required key `parameter`"))?;
        let parameter = match par_value.as_str() {
            "omega" => Parameter::Omega,
            "gamma" => Parameter::Gamma,
            other => {
                return Err(ConfigError::at(
                    par_line,
                    format!("`parameter` must be omega or gamma, got `{other}`"),
                ))
            }
        };

        let float_default = |raw: &mut Raw, key: &str, default: f64| -> Result<(f64, Option<usize>), ConfigError> {
            match raw.take(key) {
                Some((line, value)) => Ok((parse_f64(line, key, &value)?, Some(line))),
                None => Ok((default, None)),
            }
        };

        let (rho_upup, ruu_line) = float_default(&mut raw, "rho_upup", 0.5)?;
        let (rho_offdiag_abs, rod_line) = float_default(&mut raw, "rho_offdiag_abs", 0.5)?;
        let (rho_offdiag_phase, _) = float_default(&mut raw, "rho_offdiag_phase", 0.0)?;
        if !(0.0..=1.0).contains(&rho_upup) {
            return Err(ConfigError {
                line: ruu_line,
                message: format!("`rho_upup` must lie in [0, 1], got {rho_upup}"),
            });
        }
        // positivity of the initial state: |rho_ud|^2 <= rho_uu rho_dd
        let coh_cap = rho_upup * (1.0 - rho_upup);
        if rho_offdiag_abs < 0.0
            || rho_offdiag_abs * rho_offdiag_abs > coh_cap + 1e-12
        {
            return Err(ConfigError {
                line: rod_line.or(ruu_line),
                message: format!(
                    "`rho_offdiag_abs` = {rho_offdiag_abs} violates positivity: \
                     |rho_offdiag|^2 must not exceed rho_upup * (1 - rho_upup) = {coh_cap}"
                ),
            });
        }

        let (omega, om_line) = float_default(&mut raw, "omega", 1.0)?;
        if !omega.is_finite() {
            return Err(ConfigError { line: om_line, message: "`omega` must be finite".into() });
        }
        let (gamma, ga_line) = match raw.take("gamma") {
            Some((line, value)) => (parse_f64(line, "gamma", &value)?, Some(line)),
            None => return Err(ConfigError::general("missing required key `gamma`")),
        };
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(ConfigError {
                line: ga_line,
                message: format!("`gamma` must be a non-negative rate, got {gamma}"),
            });
        }

        let t_single = raw.take("t");
        let t_listed = raw.take("t_grid");
        let (t_grid, t_was_grid) = match (t_single, t_listed) {
            (Some((line, v)), None) => {
                let t = parse_f64(line, "t", &v)?;
                if !(t.is_finite() && t > 0.0) {
                    return Err(ConfigError::at(line, format!("`t` must be positive, got {t}")));
                }
                (vec![t], false)
            }
            (None, Some((line, v))) => (parse_grid(line, "t_grid", &v)?, true),
            (Some((line, _)), Some(_)) => {
                return Err(ConfigError::at(line, "set either `t` or `t_grid`, not both"));
            }
            (None, None) => {
                return Err(ConfigError::general("missing required key `t` (or `t_grid`)"));
            }
        };

        let d_single = raw.take("delta");
        let d_listed = raw.take("delta_grid");
        let (delta_grid, delta_was_grid) = match (d_single, d_listed) {
            (Some((line, v)), None) => {
                let d = parse_f64(line, "delta", &v)?;
                if !(d.is_finite() && d > 0.0) {
                    return Err(ConfigError::at(line, format!("`delta` must be positive, got {d}")));
                }
                (vec![d], false)
            }
            (None, Some((line, v))) => (parse_grid(line, "delta_grid", &v)?, true),
            (Some((line, _)), Some(_)) => {
                return Err(ConfigError::at(line, "set either `delta` or `delta_grid`, not both"));
            }
            (None, None) => (Vec::new(), false),
        };

        let count_default = |raw: &mut Raw, key: &str, default: usize| -> Result<usize, ConfigError> {
            match raw.take(key) {
                Some((line, value)) => {
                    let n = parse_usize(line, key, &value)?;
                    if n == 0 {
                        return Err(ConfigError::at(line, format!("`{key}` must be at least 1")));
                    }
                    Ok(n)
                }
                None => Ok(default),
            }
        };
        let n_samples = count_default(&mut raw, "n_samples", 100_000)?;
        let nu = count_default(&mut raw, "nu", 1000)?;
        let replicates = count_default(&mut raw, "replicates", 100)?;

        let scheme = match raw.take("scheme") {
            Some((line, value)) => match value.as_str() {
                "timings" => SchemeKey::Timings,
                "timings+measurement" => SchemeKey::TimingsPlusMeasurement,
                "measurement" => SchemeKey::Measurement,
                "syndrome" => SchemeKey::Syndrome,
                other => {
                    return Err(ConfigError::at(
                        line,
                        format!(
                            "`scheme` must be timings, timings+measurement, measurement, \
                             or syndrome, got `{other}`"
                        ),
                    ))
                }
            },
            None => SchemeKey::TimingsPlusMeasurement,
        };

        let estimator = match raw.take("estimator") {
            Some((line, value)) => match value.as_str() {
                "mle" => EstimatorKind::MaxLikelihood,
                "bayes" => EstimatorKind::Bayes,
                other => {
                    return Err(ConfigError::at(
                        line,
                        format!("`estimator` must be mle or bayes, got `{other}`"),
                    ))
                }
            },
            None => EstimatorKind::MaxLikelihood,
        };

        // seed precedence: command line, then file, then environment, then 0
        let seed = match (overrides.seed, raw.take("seed"), env_seed) {
            (Some(s), _, _) => s,
            (None, Some((line, value)), _) => value.parse::<u64>().map_err(|_| {
                ConfigError::at(line, format!("`seed` must be an unsigned integer, got `{value}`"))
            })?,
            (None, None, Some(env)) => env.parse::<u64>().map_err(|_| {
                ConfigError::general(format!(
                    "TRAJFISHER_SEED must be an unsigned integer, got `{env}`"
                ))
            })?,
            (None, None, None) => 0,
        };

        let format = match (overrides.format, raw.take("format")) {
            (Some(f), _) => f,
            (None, Some((line, value))) => match value.as_str() {
                "csv" => OutputFormat::Csv,
                "json" => OutputFormat::Json,
                other => {
                    return Err(ConfigError::at(
                        line,
                        format!("`format` must be csv or json, got `{other}`"),
                    ))
                }
            },
            (None, None) => OutputFormat::Csv,
        };

        let config = RunConfig {
            command,
            channel,
            parameter,
            rho_upup,
            rho_offdiag_abs,
            rho_offdiag_phase,
            omega,
            gamma,
            t_grid,
            t_was_grid,
            delta_grid,
            delta_was_grid,
            n_samples,
            nu,
            replicates,
            scheme,
            estimator,
            seed,
            format,
        };
        config.validate_for_command()?;
        Ok(config)
    }

    fn validate_for_command(&self) -> Result<(), ConfigError> {
        match self.command {
            Command::Rates => {
                if self.gamma <= 0.0 {
                    return Err(ConfigError::general(
                        "extraction rates need `gamma` > 0".to_string(),
                    ));
                }
            }
            Command::Qec => {
                if self.channel != ChannelKind::SpinFlip {
                    return Err(ConfigError::general(
                        "syndrome readout is defined for `channel = flip`".to_string(),
                    ));
                }
                if self.delta_grid.is_empty() {
                    return Err(ConfigError::general(
                        "missing required key `delta` (or `delta_grid`)".to_string(),
                    ));
                }
                if self.gamma <= 0.0 {
                    return Err(ConfigError::general(
                        "syndrome readout needs `gamma` > 0".to_string(),
                    ));
                }
                let t = self.t_grid[0];
                for &d in &self.delta_grid {
                    if trajfisher_core::qecmon::checked_intervals(t, d).is_err() {
                        return Err(ConfigError::general(format!(
                            "`t` = {t} is not an integer multiple of `delta` = {d}"
                        )));
                    }
                }
            }
            Command::Estimate => {
                if self.replicates < 2 {
                    return Err(ConfigError::general(
                        "`replicates` must be at least 2 for a scatter estimate".to_string(),
                    ));
                }
                if self.scheme == SchemeKey::Syndrome {
                    if self.channel != ChannelKind::SpinFlip {
                        return Err(ConfigError::general(
                            "`scheme = syndrome` needs `channel = flip`".to_string(),
                        ));
                    }
                    if self.delta_grid.len() != 1 {
                        return Err(ConfigError::general(
                            "`scheme = syndrome` needs a single `delta`".to_string(),
                        ));
                    }
                }
            }
            Command::Analytic | Command::Simulate => {}
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ChannelSpec, ConfigError> {
        ChannelSpec::new(self.channel, self.omega, self.gamma)
            .map_err(|e| ConfigError::general(format!("invalid channel: {e}")))
    }

    pub fn initial_state(&self) -> Result<DensityMatrix, ConfigError> {
        let coh = c64(
            self.rho_offdiag_abs * self.rho_offdiag_phase.cos(),
            self.rho_offdiag_abs * self.rho_offdiag_phase.sin(),
        );
        DensityMatrix::qubit(self.rho_upup, coh)
            .map_err(|e| ConfigError::general(format!("invalid initial state: {e}")))
    }

    pub fn monitoring_scheme(&self) -> MonitoringScheme {
        match self.scheme {
            SchemeKey::Timings => MonitoringScheme::JumpTimings,
            SchemeKey::TimingsPlusMeasurement => MonitoringScheme::JumpsPlusFinalMeasurement,
            SchemeKey::Measurement => MonitoringScheme::FinalMeasurementOnly,
            SchemeKey::Syndrome => MonitoringScheme::SyndromeStream { delta: self.delta_grid[0] },
        }
    }

    pub fn channel_name(&self) -> &'static str {
        match self.channel {
            ChannelKind::Relaxation => "relaxation",
            ChannelKind::SpinFlip => "flip",
            ChannelKind::Dephasing => "dephasing",
        }
    }

    pub fn parameter_name(&self) -> &'static str {
        match self.parameter {
            Parameter::Omega => "omega",
            Parameter::Gamma => "gamma",
        }
    }

    fn estimator_name(&self) -> &'static str {
        match self.estimator {
            EstimatorKind::MaxLikelihood => "mle",
            EstimatorKind::Bayes => "bayes",
        }
    }

    fn grid_value(grid: &[f64]) -> String {
        grid.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
    }

    /// Canonical `key = value` echo. Re-running the emitted pairs as a config
    /// file (with the same command) reproduces the output byte for byte, so
    /// worker counts and output paths are deliberately absent.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut meta: Vec<(String, String)> = vec![
            ("generator".into(), format!("trajfisher {}", env!("CARGO_PKG_VERSION"))),
            ("command".into(), self.command.name().into()),
            ("channel".into(), self.channel_name().into()),
            ("parameter".into(), self.parameter_name().into()),
            ("rho_upup".into(), self.rho_upup.to_string()),
            ("rho_offdiag_abs".into(), self.rho_offdiag_abs.to_string()),
            ("rho_offdiag_phase".into(), self.rho_offdiag_phase.to_string()),
            ("omega".into(), self.omega.to_string()),
            ("gamma".into(), self.gamma.to_string()),
        ];
        if self.t_was_grid {
            meta.push(("t_grid".into(), Self::grid_value(&self.t_grid)));
        } else {
            meta.push(("t".into(), self.t_grid[0].to_string()));
        }
        if !self.delta_grid.is_empty() {
            if self.delta_was_grid {
                meta.push(("delta_grid".into(), Self::grid_value(&self.delta_grid)));
            } else {
                meta.push(("delta".into(), self.delta_grid[0].to_string()));
            }
        }
        match self.command {
            Command::Simulate => {
                meta.push(("n_samples".into(), self.n_samples.to_string()));
            }
            Command::Estimate => {
                meta.push(("scheme".into(), self.scheme.name().into()));
                meta.push(("estimator".into(), self.estimator_name().into()));
                meta.push(("nu".into(), self.nu.to_string()));
                meta.push(("replicates".into(), self.replicates.to_string()));
            }
            Command::Analytic | Command::Rates | Command::Qec => {}
        }
        meta.push(("seed".into(), self.seed.to_string()));
        meta.push(("format".into(), self.format.name().into()));
        meta
    }
}
