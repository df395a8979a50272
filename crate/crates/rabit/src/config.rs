//! Run configuration: JSON file ingestion, command-line overrides and
//! resolution into core types.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rabit_core::design::validate_design;
use rabit_core::simulation::SimulationMode;
use rabit_core::tail::DEFAULT_TOLERANCE;
use rabit_core::{AccrualPlan, DesignSpec, TailSettings};
use serde::{Deserialize, Serialize};

use crate::error::{core_field_errors, AppError, FieldError};

/// Default one-sided overall level.
pub const DEFAULT_ALPHA: f64 = 0.025;
/// Default one-sided interim pruning level.
pub const DEFAULT_ALPHA_INTERIM: f64 = 0.3;
/// Smallest basket in an allocation sweep unless configured.
pub const DEFAULT_MIN_BASKET: u64 = 10;
pub const DEFAULT_STEP: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accrual: Option<AccrualConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    /// Absolute accuracy of each joint-tail evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_total: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proportions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect_sizes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_interim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccrualConfig {
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeConfig {
    #[default]
    Statistic,
    Participant,
}

impl From<ModeConfig> for SimulationMode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::Statistic => SimulationMode::Statistic,
            ModeConfig::Participant => SimulationMode::Participant,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
    /// Optional per-replicate CSV log.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_basket: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a JSON document. Errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { String::new() } else { path };
            AppError::field(field, e.inner().to_string())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn tail_settings(&self, default_tolerance: f64) -> Result<TailSettings, AppError> {
        let settings = TailSettings::with_tolerance(self.tolerance.unwrap_or(default_tolerance));
        settings
            .validate()
            .map_err(|e| AppError::field("tolerance", e.to_string()))?;
        Ok(settings)
    }

    /// The design, with defaults for `alpha`, `alpha_interim` and `active`.
    pub fn design_spec(&self) -> Result<DesignSpec, AppError> {
        resolve_design(&self.design, false)
    }

    /// Design for an allocation sweep: proportions may be omitted and
    /// `n_total` must be a whole number.
    pub fn sweep_design(&self) -> Result<DesignSpec, AppError> {
        let spec = resolve_design(&self.design, true)?;
        if spec.n_total.fract() != 0.0 {
            return Err(AppError::field(
                "design.n_total",
                "an allocation sweep needs a whole number of participants",
            ));
        }
        Ok(spec)
    }

    pub fn accrual_plan(&self) -> Result<Option<AccrualPlan>, AppError> {
        self.accrual
            .as_ref()
            .map(|a| {
                AccrualPlan::new(a.rates.clone())
                    .map_err(|e| AppError::field("accrual.rates", e.to_string()))
            })
            .transpose()
    }

    pub fn sweep_settings(&self) -> (u64, u64) {
        let s = self.sweep.clone().unwrap_or_default();
        (s.step.unwrap_or(DEFAULT_STEP), s.min_basket.unwrap_or(DEFAULT_MIN_BASKET))
    }

    pub fn format(&self, default: Format) -> Format {
        self.output.as_ref().and_then(|o| o.format).unwrap_or(default)
    }

    pub fn output_path(&self) -> Option<&Path> {
        self.output.as_ref().and_then(|o| o.path.as_deref())
    }
}

fn resolve_design(d: &DesignConfig, sweep: bool) -> Result<DesignSpec, AppError> {
    let mut missing = Vec::new();
    let mut need = |name: &str, present: bool| {
        if !present {
            missing.push(FieldError::new(format!("design.{name}"), "missing required field"));
        }
    };
    need("n_total", d.n_total.is_some());
    need("effect_sizes", d.effect_sizes.is_some());
    need("info_time", d.info_time.is_some());
    if !sweep {
        need("proportions", d.proportions.is_some());
    }
    if !missing.is_empty() {
        return Err(AppError::Invalid(missing));
    }

    let effect_sizes = d.effect_sizes.clone().unwrap_or_default();
    let k = d
        .k
        .or(d.proportions.as_ref().map(Vec::len))
        .unwrap_or(effect_sizes.len());
    let proportions = match &d.proportions {
        Some(p) => p.clone(),
        None => vec![1.0 / k.max(1) as f64; k],
    };
    let spec = DesignSpec {
        k,
        n_total: d.n_total.unwrap_or_default(),
        proportions,
        effect_sizes,
        active: d.active.clone().unwrap_or_else(|| vec![true; k]),
        info_time: d.info_time.unwrap_or_default(),
        alpha: d.alpha.unwrap_or(DEFAULT_ALPHA),
        alpha_interim: d.alpha_interim.unwrap_or(DEFAULT_ALPHA_INTERIM),
    };
    validate_design(spec).map_err(|e| AppError::Invalid(core_field_errors(&e, "design.")))
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration.
    #[arg(long, short = 'c', value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_name = "N")]
    pub n_total: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "P1,P2,..")]
    pub proportions: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "D1,D2,..")]
    pub effect_sizes: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "BOOL,..")]
    pub active: Option<Vec<bool>>,
    #[arg(long, value_name = "T")]
    pub info_time: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub alpha_interim: Option<f64>,
    /// Accrual rates in persons per month, one per basket.
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "A1,A2,..")]
    pub accrual: Option<Vec<f64>>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long, short = 'o', value_name = "FILE")]
    pub output: Option<PathBuf>,
}

impl Overrides {
    /// Loads the config file (if any) and applies every flag on top.
    pub fn load(&self) -> Result<RunConfig, AppError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg);
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut RunConfig) {
        let d = &mut cfg.design;
        set(&mut d.k, self.k);
        set(&mut d.n_total, self.n_total);
        set(&mut d.proportions, self.proportions.clone());
        set(&mut d.effect_sizes, self.effect_sizes.clone());
        set(&mut d.active, self.active.clone());
        set(&mut d.info_time, self.info_time);
        set(&mut d.alpha, self.alpha);
        set(&mut d.alpha_interim, self.alpha_interim);
        if let Some(rates) = &self.accrual {
            cfg.accrual = Some(AccrualConfig { rates: rates.clone() });
        }
        set(&mut cfg.tolerance, self.tolerance);
        if self.format.is_some() || self.output.is_some() {
            let out = cfg.output.get_or_insert_with(OutputConfig::default);
            set(&mut out.format, self.format);
            set(&mut out.path, self.output.clone());
        }
    }
}

pub(crate) fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

/// Tolerance from `RABIT_TOLERANCE`, falling back to the library default.
pub fn env_tolerance() -> Result<f64, AppError> {
    match std::env::var("RABIT_TOLERANCE") {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .map_err(|e| AppError::field("RABIT_TOLERANCE", e.to_string())),
        Err(_) => Ok(DEFAULT_TOLERANCE),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_proportions_are_named() {
        let cfg = RunConfig::from_json(
            r#"{"design": {"n_total": 150, "effect_sizes": [0.5, 0.5], "info_time": 0.5}}"#,
        )
        .unwrap();
        let err = cfg.design_spec().unwrap_err();
        assert!(err.to_string().contains("design.proportions"), "{err}");
    }

    #[test]
    fn type_errors_carry_the_path() {
        let err = RunConfig::from_json(r#"{"design": {"proportions": [0.5, "x"]}}"#).unwrap_err();
        assert!(err.to_string().contains("design.proportions[1]"), "{err}");
        let err = RunConfig::from_json(r#"{"design": {"bogus": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("design"), "{err}");
    }

    #[test]
    fn violations_map_to_design_fields() {
        let cfg = RunConfig::from_json(
            r#"{"design": {"n_total": 150, "proportions": [0.5, 0.6], "effect_sizes": [0.5, 0.5], "info_time": 0.5}}"#,
        )
        .unwrap();
        match cfg.design_spec().unwrap_err() {
            AppError::Invalid(fields) => assert_eq!(fields[0].field, "design.proportions"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn flags_win() {
        let mut cfg = RunConfig::from_json(
            r#"{"design": {"n_total": 150, "proportions": [0.5, 0.5], "effect_sizes": [0.5, 0.5], "info_time": 0.5}}"#,
        )
        .unwrap();
        let o = Overrides { n_total: Some(200.0), tolerance: Some(1e-6), ..Default::default() };
        o.apply(&mut cfg);
        let spec = cfg.design_spec().unwrap();
        assert_eq!(spec.n_total, 200.0);
        assert_eq!(spec.alpha, DEFAULT_ALPHA);
        assert_eq!(cfg.tail_settings(DEFAULT_TOLERANCE).unwrap().tolerance, 1e-6);
    }
}
