//! Operations shared by the command line and the HTTP service.

use std::io::Write as _;
use std::path::Path;

use rabit_core::allocation::AllocationGrid;
use rabit_core::inference::{mask_probability, DEFAULT_N_MAX};
use rabit_core::simulation::{SimulationMode, Simulator};
use rabit_core::{DesignSpec, TailSettings};

use crate::config::RunConfig;
use crate::engine::{Engine, SweepRow};
use crate::error::{AppError, FieldError};
use crate::output::num;
use crate::report::{
    EvaluateReport, ForecastReport, ForecastResponse, ResolvedInputs, SampleSizeReport,
    SimulationReport,
};

/// Largest sweep the command line accepts.
pub const CLI_MAX_SWEEP_ROWS: u128 = 1_000_000;
/// Largest replicate count the service accepts.
pub const SERVICE_MAX_REPLICATES: u64 = 1_000_000;

pub fn evaluate(
    engine: &Engine,
    cfg: &RunConfig,
    default_tolerance: f64,
) -> Result<EvaluateReport, AppError> {
    let (spec, settings) = resolve(cfg, default_tolerance)?;
    let accrual = cfg.accrual_plan()?;
    let result = engine.evaluate(&spec, &settings)?;
    let forecast = accrual
        .as_ref()
        .map(|a| engine.forecast(&spec, a, spec.active_mask()))
        .transpose()?;
    let inputs = ResolvedInputs::new(&spec, settings.tolerance, accrual.as_ref());
    Ok(EvaluateReport::new(inputs, &spec, &result, forecast.as_ref()))
}

pub fn forecast(
    engine: &Engine,
    cfg: &RunConfig,
    default_tolerance: f64,
) -> Result<ForecastResponse, AppError> {
    let (spec, settings) = resolve(cfg, default_tolerance)?;
    let accrual = cfg
        .accrual_plan()?
        .ok_or_else(|| AppError::field("accrual", "accrual rates are required for a forecast"))?;
    let f = engine.forecast(&spec, &accrual, spec.active_mask())?;
    Ok(ForecastResponse {
        inputs: ResolvedInputs::new(&spec, settings.tolerance, Some(&accrual)),
        forecast: ForecastReport::from(&f),
    })
}

/// A validated allocation sweep, ready to run.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub base: DesignSpec,
    pub settings: TailSettings,
    pub grid: AllocationGrid,
    pub allocations: Vec<Vec<u64>>,
}

impl SweepPlan {
    pub fn new(cfg: &RunConfig, default_tolerance: f64, max_rows: u128) -> Result<Self, AppError> {
        let base = cfg.sweep_design()?;
        let settings = cfg.tail_settings(default_tolerance)?;
        let (step, min) = cfg.sweep_settings();
        let grid = AllocationGrid::new(base.k, base.n_total as u64, min, step).map_err(|e| {
            AppError::Invalid(vec![FieldError::new(
                match e {
                    rabit_core::Error::TooManyBaskets { .. } => "design.k",
                    _ => "sweep",
                },
                e.to_string(),
            )])
        })?;
        let rows = grid.row_count();
        if rows > max_rows {
            return Err(AppError::SweepTooLarge { rows, max: max_rows });
        }
        Ok(SweepPlan { allocations: grid.sorted(), base, settings, grid })
    }

    pub fn run(&self, engine: &Engine) -> Result<Vec<SweepRow>, AppError> {
        Ok(engine.sweep_rows(&self.base, &self.allocations, &self.settings)?)
    }
}

pub fn solve_n(
    engine: &Engine,
    cfg: &RunConfig,
    default_tolerance: f64,
) -> Result<SampleSizeReport, AppError> {
    let solve = cfg.solve.clone().unwrap_or_default();
    let target = solve
        .target_power
        .ok_or_else(|| AppError::field("solve.target_power", "missing required field"))?;
    let n_max = solve.n_max.unwrap_or(DEFAULT_N_MAX);
    if !(n_max.is_finite() && n_max >= 1.0) {
        return Err(AppError::field("solve.n_max", "must be a finite number of at least 1"));
    }
    // `n_total` is solved for, so a placeholder is accepted when absent.
    let mut cfg = cfg.clone();
    cfg.design.n_total.get_or_insert(n_max);
    let (spec, settings) = resolve(&cfg, default_tolerance)?;
    let s = engine.sample_size(&spec, target, n_max, &settings)?;
    let mut inputs = ResolvedInputs::new(&spec, settings.tolerance, None);
    inputs.n_total = s.n_total as f64;
    Ok(SampleSizeReport::new(inputs, target, &s))
}

/// Monte Carlo run with its analytic counterparts.
pub fn simulate(
    engine: &Engine,
    cfg: &RunConfig,
    default_tolerance: f64,
    max_replicates: Option<u64>,
) -> Result<SimulationReport, AppError> {
    let (spec, settings) = resolve(cfg, default_tolerance)?;
    let sim = cfg
        .simulation
        .clone()
        .ok_or_else(|| AppError::field("simulation", "a simulation section is required"))?;
    let replicates = sim
        .replicates
        .ok_or_else(|| AppError::field("simulation.replicates", "missing required field"))?;
    let seed = sim.seed.ok_or_else(|| AppError::field("simulation.seed", "missing required field"))?;
    if let Some(max) = max_replicates {
        if replicates > max {
            return Err(AppError::field(
                "simulation.replicates",
                format!("{replicates} exceeds the limit of {max}"),
            ));
        }
    }
    let mode: SimulationMode = sim.mode.unwrap_or_default().into();
    let accrual = cfg.accrual_plan()?;
    let g = spec.active_mask();
    let alpha_star = engine.alpha_star(&spec, &settings)?;
    let summary =
        engine.simulate(&spec, g, alpha_star, mode, accrual.clone(), replicates, seed)?;
    let analytic = engine.power(&spec, g, alpha_star, &settings)?;
    let forecast = accrual.as_ref().map(|a| engine.forecast(&spec, a, g)).transpose()?;
    let expected = rabit_core::design::enumerate_masks(spec.k)?
        .map(|m| mask_probability(&spec, m, g))
        .collect::<rabit_core::Result<Vec<_>>>()?;
    let inputs = ResolvedInputs::new(&spec, settings.tolerance, accrual.as_ref());
    Ok(SimulationReport::new(
        inputs,
        mode,
        alpha_star,
        analytic,
        forecast.map(|f| f.expected_duration),
        &expected,
        &summary,
    ))
}

/// Writes one CSV line per replicate of the run described by `report`.
pub fn write_replicate_log(
    cfg: &RunConfig,
    report: &SimulationReport,
    path: &Path,
) -> Result<(), AppError> {
    let spec = cfg.design_spec()?;
    let mode: SimulationMode =
        cfg.simulation.as_ref().and_then(|s| s.mode).unwrap_or_default().into();
    let sim = Simulator::new(&spec, spec.active_mask(), report.alpha_star, mode, cfg.accrual_plan()?)?;
    let file = std::fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| AppError::io(path, e);
    writeln!(w, "replicate,mask,pooled_statistic,rejected,duration,participants").map_err(io)?;
    for r in 0..report.replicates {
        let o = sim.replicate(report.seed, r);
        writeln!(
            w,
            "{r},{},{},{},{},{}",
            o.realized_mask,
            o.pooled_statistic.map(num).unwrap_or_default(),
            o.rejected as u8,
            o.duration.map(num).unwrap_or_default(),
            num(o.participants)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

fn resolve(cfg: &RunConfig, default_tolerance: f64) -> Result<(DesignSpec, TailSettings), AppError> {
    let spec = cfg.design_spec();
    let settings = cfg.tail_settings(default_tolerance);
    match (spec, settings) {
        (Ok(s), Ok(t)) => Ok((s, t)),
        (Err(AppError::Invalid(mut a)), Err(AppError::Invalid(b))) => {
            a.extend(b);
            Err(AppError::Invalid(a))
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}
