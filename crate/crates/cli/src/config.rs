//! Flat `key = value` scenario files.
//!
//! Every key has a default (the worked-example parameter set), unknown or
//! repeated keys are rejected, and [`ScenarioConfig::to_text`] writes a file
//! that parses back to the same configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use catbond_core::contract::CatBondContract;
use catbond_core::loss_process::{Intensity, ShotNoiseSpec};
use catbond_core::mc_oracle::McConfig;
use catbond_core::model1::{Arrivals, Model1Spec};
use catbond_core::model2::Model2State;
use catbond_core::par::Execution;
use catbond_core::rates::CirParams;
use catbond_core::severity::SeverityModel;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Model1,
    Model2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeverityKind {
    Exponential,
    LogNormal,
    Pareto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalKind {
    Poisson,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    pub principal: f64,
    pub recovery: f64,
    pub threshold: f64,
    pub maturity: f64,
    pub lambda: f64,
    /// `(start, rate)` pieces; overrides `lambda` when non-empty.
    pub lambda_schedule: Vec<(f64, f64)>,
    pub alpha: f64,
    pub severity: SeverityKind,
    pub severity_mu: f64,
    pub severity_sigma: f64,
    pub severity_rate: f64,
    pub severity_shape: f64,
    pub severity_scale: f64,
    pub cir_r0: f64,
    pub cir_gamma: f64,
    pub cir_theta: f64,
    pub cir_sigma: f64,
    /// Constant short rate for Model 1.
    pub rate: f64,
    pub seed: u64,
    pub mc_paths: usize,
    pub mc_steps_per_year: usize,
    pub mc_antithetic: bool,
    pub grid_step: f64,
    pub sweep_thresholds: Vec<f64>,
    pub surface_thresholds: Vec<f64>,
    pub surface_maturities: Vec<f64>,
    pub model1_arrivals: ArrivalKind,
    pub model1_arrival_rate: f64,
    pub model1_times: Vec<f64>,
    pub psi_grid_step: f64,
    pub validate_sigmas: f64,
    pub validate_jump_tolerance: f64,
    pub validate_laplace_tolerance: f64,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Model2,
            principal: 1.0,
            recovery: 0.0,
            threshold: 10_000.0,
            maturity: 3.0,
            lambda: 0.5,
            lambda_schedule: Vec::new(),
            alpha: 0.8,
            severity: SeverityKind::LogNormal,
            severity_mu: 6.387,
            severity_sigma: 0.153,
            severity_rate: 1.0 / 600.0,
            severity_shape: 3.0,
            severity_scale: 1200.0,
            cir_r0: 0.0204,
            cir_gamma: 0.0884,
            cir_theta: 0.0204,
            cir_sigma: 0.0477,
            rate: 0.0,
            seed: 1,
            mc_paths: 100_000,
            mc_steps_per_year: 256,
            mc_antithetic: false,
            grid_step: 1.0 / 365.0,
            sweep_thresholds: vec![5000.0, 9000.0, 15000.0, 20000.0],
            surface_thresholds: (1..=10).map(|k| 2000.0 * k as f64).collect(),
            surface_maturities: (1..=10).map(|k| 0.5 * k as f64).collect(),
            model1_arrivals: ArrivalKind::Poisson,
            model1_arrival_rate: 1.0,
            model1_times: vec![1.0, 2.0, 3.0],
            psi_grid_step: 0.005,
            validate_sigmas: 3.0,
            validate_jump_tolerance: 0.005,
            validate_laplace_tolerance: 0.01,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn config_error(line: usize, msg: impl std::fmt::Display) -> CliError {
    if line == 0 {
        CliError::Config(msg.to_string())
    } else {
        CliError::Config(format!("line {line}: {msg}"))
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| config_error(line, format!("`{key}` expects a finite number, got `{value}`")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, CliError> {
    value
        .parse::<usize>()
        .map_err(|_| config_error(line, format!("`{key}` expects a non-negative integer, got `{value}`")))
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_f64(line, key, v.trim())).collect()
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(config_error(line, format!("`{key}` expects true or false, got `{value}`"))),
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ScenarioConfig {
    /// Parses a scenario file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_error(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(config_error(line, format!("duplicate key `{key}`")));
            }
            cfg.set(line, key, value)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), CliError> {
        let f = |v: &str| parse_f64(line, key, v);
        match key {
            "model" => {
                self.model = match value {
                    "model1" => ModelKind::Model1,
                    "model2" => ModelKind::Model2,
                    _ => return Err(config_error(line, format!("unknown model `{value}`"))),
                }
            }
            "principal" => self.principal = f(value)?,
            "recovery" => self.recovery = f(value)?,
            "threshold" => self.threshold = f(value)?,
            "maturity" => self.maturity = f(value)?,
            "lambda" => self.lambda = f(value)?,
            "lambda.schedule" => {
                let mut pieces = Vec::new();
                if !value.is_empty() {
                    for item in value.split(',') {
                        let (s, r) = item.split_once(':').ok_or_else(|| {
                            config_error(line, format!("`{key}` expects start:rate pairs"))
                        })?;
                        pieces.push((f(s.trim())?, f(r.trim())?));
                    }
                }
                self.lambda_schedule = pieces;
            }
            "alpha" => self.alpha = f(value)?,
            "severity" => {
                self.severity = match value {
                    "exponential" => SeverityKind::Exponential,
                    "lognormal" => SeverityKind::LogNormal,
                    "pareto" => SeverityKind::Pareto,
                    _ => return Err(config_error(line, format!("unknown severity `{value}`"))),
                }
            }
            "severity.mu" => self.severity_mu = f(value)?,
            "severity.sigma" => self.severity_sigma = f(value)?,
            "severity.rate" => self.severity_rate = f(value)?,
            "severity.shape" => self.severity_shape = f(value)?,
            "severity.scale" => self.severity_scale = f(value)?,
            "cir.r0" => self.cir_r0 = f(value)?,
            "cir.gamma" => self.cir_gamma = f(value)?,
            "cir.theta" => self.cir_theta = f(value)?,
            "cir.sigma" => self.cir_sigma = f(value)?,
            "rate" => self.rate = f(value)?,
            "seed" => {
                self.seed = value.parse().map_err(|_| {
                    config_error(line, format!("`seed` expects a 64-bit integer, got `{value}`"))
                })?
            }
            "mc.paths" => self.mc_paths = parse_usize(line, key, value)?,
            "mc.steps_per_year" => self.mc_steps_per_year = parse_usize(line, key, value)?,
            "mc.antithetic" => self.mc_antithetic = parse_bool(line, key, value)?,
            "grid.step" => self.grid_step = f(value)?,
            "sweep.thresholds" => self.sweep_thresholds = parse_list(line, key, value)?,
            "surface.thresholds" => self.surface_thresholds = parse_list(line, key, value)?,
            "surface.maturities" => self.surface_maturities = parse_list(line, key, value)?,
            "model1.arrivals" => {
                self.model1_arrivals = match value {
                    "poisson" => ArrivalKind::Poisson,
                    "deterministic" => ArrivalKind::Deterministic,
                    _ => return Err(config_error(line, format!("unknown arrivals `{value}`"))),
                }
            }
            "model1.arrival_rate" => self.model1_arrival_rate = f(value)?,
            "model1.times" => self.model1_times = parse_list(line, key, value)?,
            "psi.grid_step" => self.psi_grid_step = f(value)?,
            "validate.sigmas" => self.validate_sigmas = f(value)?,
            "validate.jump_tolerance" => self.validate_jump_tolerance = f(value)?,
            "validate.laplace_tolerance" => self.validate_laplace_tolerance = f(value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(config_error(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Fully resolved configuration in the input format.
    pub fn to_text(&self) -> String {
        let model = match self.model {
            ModelKind::Model1 => "model1",
            ModelKind::Model2 => "model2",
        };
        let severity = match self.severity {
            SeverityKind::Exponential => "exponential",
            SeverityKind::LogNormal => "lognormal",
            SeverityKind::Pareto => "pareto",
        };
        let arrivals = match self.model1_arrivals {
            ArrivalKind::Poisson => "poisson",
            ArrivalKind::Deterministic => "deterministic",
        };
        let schedule = self
            .lambda_schedule
            .iter()
            .map(|(s, r)| format!("{s}:{r}"))
            .collect::<Vec<_>>()
            .join(", ");
        let entries: Vec<(&str, String)> = vec![
            ("model", model.into()),
            ("principal", self.principal.to_string()),
            ("recovery", self.recovery.to_string()),
            ("threshold", self.threshold.to_string()),
            ("maturity", self.maturity.to_string()),
            ("lambda", self.lambda.to_string()),
            ("lambda.schedule", schedule),
            ("alpha", self.alpha.to_string()),
            ("severity", severity.into()),
            ("severity.mu", self.severity_mu.to_string()),
            ("severity.sigma", self.severity_sigma.to_string()),
            ("severity.rate", self.severity_rate.to_string()),
            ("severity.shape", self.severity_shape.to_string()),
            ("severity.scale", self.severity_scale.to_string()),
            ("cir.r0", self.cir_r0.to_string()),
            ("cir.gamma", self.cir_gamma.to_string()),
            ("cir.theta", self.cir_theta.to_string()),
            ("cir.sigma", self.cir_sigma.to_string()),
            ("rate", self.rate.to_string()),
            ("seed", self.seed.to_string()),
            ("mc.paths", self.mc_paths.to_string()),
            ("mc.steps_per_year", self.mc_steps_per_year.to_string()),
            ("mc.antithetic", self.mc_antithetic.to_string()),
            ("grid.step", self.grid_step.to_string()),
            ("sweep.thresholds", fmt_list(&self.sweep_thresholds)),
            ("surface.thresholds", fmt_list(&self.surface_thresholds)),
            ("surface.maturities", fmt_list(&self.surface_maturities)),
            ("model1.arrivals", arrivals.into()),
            ("model1.arrival_rate", self.model1_arrival_rate.to_string()),
            ("model1.times", fmt_list(&self.model1_times)),
            ("psi.grid_step", self.psi_grid_step.to_string()),
            ("validate.sigmas", self.validate_sigmas.to_string()),
            ("validate.jump_tolerance", self.validate_jump_tolerance.to_string()),
            ("validate.laplace_tolerance", self.validate_laplace_tolerance.to_string()),
            ("output.dir", self.output_dir.display().to_string()),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    fn wrap<T>(r: catbond_core::Result<T>) -> Result<T, CliError> {
        r.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn severity_model(&self) -> Result<SeverityModel, CliError> {
        Self::wrap(match self.severity {
            SeverityKind::Exponential => SeverityModel::exponential(self.severity_rate),
            SeverityKind::LogNormal => SeverityModel::log_normal(self.severity_mu, self.severity_sigma),
            SeverityKind::Pareto => SeverityModel::pareto(self.severity_shape, self.severity_scale),
        })
    }

    pub fn shot_noise(&self) -> Result<ShotNoiseSpec, CliError> {
        let intensity = if self.lambda_schedule.is_empty() {
            Self::wrap(Intensity::constant(self.lambda))?
        } else {
            let (starts, rates) = self.lambda_schedule.iter().copied().unzip();
            Self::wrap(Intensity::piecewise(starts, rates))?
        };
        Self::wrap(ShotNoiseSpec::new(intensity, self.alpha, self.severity_model()?))
    }

    pub fn contract(&self) -> Result<CatBondContract, CliError> {
        Self::wrap(CatBondContract::new(
            self.principal,
            self.recovery,
            self.threshold,
            self.maturity,
        ))
    }

    pub fn cir(&self) -> Result<CirParams, CliError> {
        Self::wrap(CirParams::new(
            self.cir_r0,
            self.cir_gamma,
            self.cir_theta,
            self.cir_sigma,
        ))
    }

    pub fn model2(&self) -> Result<Model2State, CliError> {
        if self.model != ModelKind::Model2 {
            return Err(CliError::Config("this command needs `model = model2`".into()));
        }
        Self::wrap(Model2State::new(self.shot_noise()?, self.contract()?, self.cir()?))
    }

    pub fn model1(&self) -> Result<Model1Spec, CliError> {
        let arrivals = match self.model1_arrivals {
            ArrivalKind::Poisson => Arrivals::Poisson {
                rate: self.model1_arrival_rate,
            },
            ArrivalKind::Deterministic => Arrivals::Deterministic {
                times: self.model1_times.clone(),
            },
        };
        Self::wrap(Model1Spec::new(
            arrivals,
            self.shot_noise()?,
            self.contract()?,
            self.rate,
        ))
    }

    pub fn mc(&self, execution: Execution) -> Result<McConfig, CliError> {
        let mc = McConfig {
            n_paths: self.mc_paths,
            steps_per_year: self.mc_steps_per_year,
            seed: self.seed,
            antithetic: self.mc_antithetic,
            execution,
        };
        Self::wrap(mc.validate())?;
        Ok(mc)
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(CliError::Config(format!("`{name}` must be > 0, got {v}")))
            }
        };
        positive("grid.step", self.grid_step)?;
        positive("psi.grid_step", self.psi_grid_step)?;
        if self.validate_sigmas < 0.0
            || self.validate_jump_tolerance < 0.0
            || self.validate_laplace_tolerance < 0.0
        {
            return Err(CliError::Config("validation tolerances must be >= 0".into()));
        }
        for (name, list) in [
            ("sweep.thresholds", &self.sweep_thresholds),
            ("surface.thresholds", &self.surface_thresholds),
            ("surface.maturities", &self.surface_maturities),
        ] {
            if list.is_empty() {
                return Err(CliError::Config(format!("`{name}` must not be empty")));
            }
            for &v in list {
                positive(name, v)?;
            }
        }
        match self.model {
            ModelKind::Model2 => self.model2().map(|_| ()),
            ModelKind::Model1 => self.model1().map(|_| ()),
        }
    }
}
