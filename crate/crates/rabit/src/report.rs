//! Serializable results. The CLI and the HTTP service emit the same
//! structures, so their numeric fields agree bit for bit.

use rabit_core::design::gini_impurity;
use rabit_core::inference::SampleSize;
use rabit_core::operations::Interval;
use rabit_core::simulation::{Estimate, SimulationMode};
use rabit_core::{AccrualPlan, DesignSpec, InferenceResult, OperationalForecast, SimulationSummary};
use serde::Serialize;

/// The fully resolved inputs, echoed back with every result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedInputs {
    pub k: usize,
    pub n_total: f64,
    pub proportions: Vec<f64>,
    pub effect_sizes: Vec<f64>,
    pub active: Vec<bool>,
    pub info_time: f64,
    pub alpha: f64,
    pub alpha_interim: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accrual_rates: Option<Vec<f64>>,
}

impl ResolvedInputs {
    pub fn new(spec: &DesignSpec, tolerance: f64, accrual: Option<&AccrualPlan>) -> Self {
        ResolvedInputs {
            k: spec.k,
            n_total: spec.n_total,
            proportions: spec.proportions.clone(),
            effect_sizes: spec.effect_sizes.clone(),
            active: spec.active.clone(),
            info_time: spec.info_time,
            alpha: spec.alpha,
            alpha_interim: spec.alpha_interim,
            tolerance,
            accrual_rates: accrual.map(|a| a.rates().to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskRow {
    /// Survivors as a bit string, basket 1 first.
    pub mask: String,
    pub mask_probability: f64,
    pub null_contribution: f64,
    pub power_contribution: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub participants: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalReport {
    pub lower: f64,
    pub upper: f64,
}

impl From<Interval> for IntervalReport {
    fn from(i: Interval) -> Self {
        IntervalReport { lower: i.lower, upper: i.upper }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastMaskRow {
    pub mask: String,
    pub probability: f64,
    pub duration: f64,
    pub participants: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub expected_duration: f64,
    pub expected_participants: f64,
    pub duration_variance: f64,
    pub participants_variance: f64,
    /// Half-width `1.96 √(Var / 2^K)`.
    pub duration_ci: IntervalReport,
    pub participants_ci: IntervalReport,
    /// Half-width `1.96 √Var`.
    pub duration_ci_unscaled: IntervalReport,
    pub participants_ci_unscaled: IntervalReport,
    pub per_mask: Vec<ForecastMaskRow>,
}

impl From<&OperationalForecast> for ForecastReport {
    fn from(f: &OperationalForecast) -> Self {
        ForecastReport {
            expected_duration: f.expected_duration,
            expected_participants: f.expected_participants,
            duration_variance: f.duration_variance,
            participants_variance: f.participants_variance,
            duration_ci: f.duration_ci.into(),
            participants_ci: f.participants_ci.into(),
            duration_ci_unscaled: f.duration_ci_unscaled.into(),
            participants_ci_unscaled: f.participants_ci_unscaled.into(),
            per_mask: f
                .per_mask
                .iter()
                .map(|r| ForecastMaskRow {
                    mask: r.mask.to_string(),
                    probability: r.probability,
                    duration: r.duration,
                    participants: r.participants,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateReport {
    pub inputs: ResolvedInputs,
    pub alpha_star: f64,
    pub type1: f64,
    pub power: f64,
    pub gini: f64,
    pub z_t: f64,
    pub z_star: f64,
    pub per_mask: Vec<MaskRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecast: Option<ForecastReport>,
}

impl EvaluateReport {
    pub fn new(
        inputs: ResolvedInputs,
        spec: &DesignSpec,
        result: &InferenceResult,
        forecast: Option<&OperationalForecast>,
    ) -> Self {
        let per_mask = result
            .per_mask
            .iter()
            .enumerate()
            .map(|(i, r)| MaskRow {
                mask: r.mask.to_string(),
                mask_probability: r.mask_probability,
                null_contribution: r.null_contribution,
                power_contribution: r.power_contribution,
                duration: forecast.map(|f| f.per_mask[i].duration),
                participants: forecast.map(|f| f.per_mask[i].participants),
            })
            .collect();
        EvaluateReport {
            inputs,
            alpha_star: result.alpha_star,
            type1: result.type1,
            power: result.power,
            gini: gini_impurity(&spec.proportions),
            z_t: result.z_t,
            z_star: result.z_star,
            per_mask,
            forecast: forecast.map(ForecastReport::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastResponse {
    pub inputs: ResolvedInputs,
    #[serde(flatten)]
    pub forecast: ForecastReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSizeReport {
    pub inputs: ResolvedInputs,
    pub target_power: f64,
    pub n_total: u64,
    pub power: f64,
    pub alpha_star: f64,
}

impl SampleSizeReport {
    pub fn new(inputs: ResolvedInputs, target_power: f64, s: &SampleSize) -> Self {
        SampleSizeReport {
            inputs,
            target_power,
            n_total: s.n_total,
            power: s.power,
            alpha_star: s.alpha_star,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub mean: f64,
    pub se: f64,
}

impl From<Estimate> for EstimateReport {
    fn from(e: Estimate) -> Self {
        EstimateReport { mean: e.mean, se: e.se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskFrequency {
    pub mask: String,
    pub count: u64,
    pub frequency: f64,
    pub se: f64,
    /// Analytic probability of this interim outcome.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub inputs: ResolvedInputs,
    pub mode: &'static str,
    pub replicates: u64,
    pub seed: u64,
    pub alpha_star: f64,
    pub rejections: u64,
    pub rejection_rate: EstimateReport,
    /// Analytic power under the active vector (type-1 error for a null design).
    pub analytic_rejection_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_duration: Option<f64>,
    pub participants: EstimateReport,
    pub mask_frequencies: Vec<MaskFrequency>,
}

pub fn mode_name(mode: SimulationMode) -> &'static str {
    match mode {
        SimulationMode::Statistic => "statistic",
        SimulationMode::Participant => "participant",
    }
}

impl SimulationReport {
    /// `expected` holds the analytic mask probabilities in binary counting order.
    pub fn new(
        inputs: ResolvedInputs,
        mode: SimulationMode,
        alpha_star: f64,
        analytic_rejection_rate: f64,
        analytic_duration: Option<f64>,
        expected: &[f64],
        s: &SimulationSummary,
    ) -> Self {
        let k = inputs.k;
        let mask_frequencies = rabit_core::design::enumerate_masks(k)
            .map(|masks| {
                masks
                    .map(|m| {
                        let rate = s.mask_rate(m);
                        MaskFrequency {
                            mask: m.to_string(),
                            count: s.mask_count(m),
                            frequency: rate.mean,
                            se: rate.se,
                            expected: expected[m.bits() as usize],
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        SimulationReport {
            inputs,
            mode: mode_name(mode),
            replicates: s.replicate_count,
            seed: s.seed,
            alpha_star,
            rejections: s.rejections,
            rejection_rate: s.rejection_rate.into(),
            analytic_rejection_rate,
            duration: s.duration.map(Into::into),
            analytic_duration,
            participants: s.participants.into(),
            mask_frequencies,
        }
    }
}
