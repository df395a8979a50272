//! The `rabit` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rabit_core::tail::DEFAULT_TOLERANCE;
use rabit_core::TailSettings;

use crate::commands::{self, SweepPlan, CLI_MAX_SWEEP_ROWS};
use crate::config::{set, Format, ModeConfig, Overrides, SimulationConfig, SolveConfig, SweepConfig};
use crate::engine::Engine;
use crate::error::{exit, AppError};
use crate::output;
use crate::reproduce::{self, Artifact};
use crate::service::{self, ServiceConfig, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "rabit", version, about = "Design and evaluation of two-stage randomized basket trials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve alpha*, compute power and the per-mask breakdown, and forecast
    /// duration when accrual rates are given.
    Evaluate(Overrides),
    /// Evaluate every integer allocation of N across the baskets.
    Sweep(SweepArgs),
    /// Regenerate the published tables and figures and compare them cell by cell.
    Reproduce(ReproduceArgs),
    /// Monte Carlo simulation of the design.
    Simulate(SimulateArgs),
    /// Smallest N reaching a target power.
    SolveN(SolveArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Allocation step in persons.
    #[arg(long)]
    pub step: Option<u64>,
    /// Smallest basket size in the sweep.
    #[arg(long)]
    pub min_basket: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Artifacts to regenerate; all when omitted.
    #[arg(value_enum)]
    pub artifacts: Vec<Artifact>,
    /// Directory for the regenerated CSV files and the report.
    #[arg(long, default_value = "reproduction")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Print the report as JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub replicates: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeConfig>,
    /// Per-replicate CSV log.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long)]
    pub target_power: Option<f64>,
    /// Largest N considered.
    #[arg(long)]
    pub n_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "RABIT_PORT", default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "0.0.0.0")]
    pub host: std::net::IpAddr,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::VALIDATION } else { exit::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                AppError::Invalid(fields) => {
                    eprintln!("error: invalid input");
                    for f in fields {
                        eprintln!("  {f}");
                    }
                }
                _ => eprintln!("error: {e}"),
            }
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<u8, AppError> {
    let engine = Engine::new();
    match command {
        Command::Evaluate(o) => {
            let cfg = o.load()?;
            let report = commands::evaluate(&engine, &cfg, DEFAULT_TOLERANCE)?;
            let text = output::render_evaluate(&report, cfg.format(Format::Table))?;
            output::emit(cfg.output_path(), &text)?;
        }
        Command::Sweep(a) => {
            let mut cfg = a.overrides.load()?;
            if a.step.is_some() || a.min_basket.is_some() {
                let s = cfg.sweep.get_or_insert_with(SweepConfig::default);
                set(&mut s.step, a.step);
                set(&mut s.min_basket, a.min_basket);
            }
            let plan = SweepPlan::new(&cfg, DEFAULT_TOLERANCE, CLI_MAX_SWEEP_ROWS)?;
            let rows = plan.run(&engine)?;
            let text = output::render_sweep(plan.base.k, &rows, cfg.format(Format::Csv))?;
            output::emit(cfg.output_path(), &text)?;
        }
        Command::Reproduce(a) => {
            let settings = TailSettings::with_tolerance(a.tolerance);
            settings.validate().map_err(|e| AppError::field("tolerance", e.to_string()))?;
            let artifacts = if a.artifacts.is_empty() { Artifact::ALL.to_vec() } else { a.artifacts };
            let r = reproduce::run(&artifacts, &engine, &settings, Some(&a.out_dir))?;
            let text = if a.json { output::json(&r)? } else { r.render() };
            let report_path = a.out_dir.join(if a.json { "report.json" } else { "report.txt" });
            std::fs::write(&report_path, &text).map_err(|e| AppError::io(&report_path, e))?;
            output::emit(None, &text)?;
            return Ok(if r.passed() { exit::SUCCESS } else { exit::MISMATCH });
        }
        Command::Simulate(a) => {
            let mut cfg = a.overrides.load()?;
            if a.replicates.is_some() || a.seed.is_some() || a.mode.is_some() || a.log.is_some() {
                let s = cfg.simulation.get_or_insert_with(SimulationConfig::default);
                set(&mut s.replicates, a.replicates);
                set(&mut s.seed, a.seed);
                set(&mut s.mode, a.mode);
                set(&mut s.log, a.log);
            }
            let report = commands::simulate(&engine, &cfg, DEFAULT_TOLERANCE, None)?;
            if let Some(log) = cfg.simulation.as_ref().and_then(|s| s.log.clone()) {
                commands::write_replicate_log(&cfg, &report, &log)?;
            }
            let text = output::render_simulation(&report, cfg.format(Format::Table))?;
            output::emit(cfg.output_path(), &text)?;
        }
        Command::SolveN(a) => {
            let mut cfg = a.overrides.load()?;
            if a.target_power.is_some() || a.n_max.is_some() {
                let s = cfg.solve.get_or_insert_with(SolveConfig::default);
                set(&mut s.target_power, a.target_power);
                set(&mut s.n_max, a.n_max);
            }
            let report = commands::solve_n(&engine, &cfg, DEFAULT_TOLERANCE)?;
            let text = output::render_sample_size(&report, cfg.format(Format::Table))?;
            output::emit(cfg.output_path(), &text)?;
        }
        Command::Serve(a) => {
            let config = ServiceConfig::from_env()?;
            let addr = std::net::SocketAddr::new(a.host, a.port);
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::io("<runtime>", e))?;
            rt.block_on(service::serve(addr, config)).map_err(|e| AppError::io(addr.to_string(), e))?;
        }
    }
    Ok(exit::SUCCESS)
}
