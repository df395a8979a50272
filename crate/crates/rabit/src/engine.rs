//! Parallel evaluation on top of the core crate with a shared `α*` cache.
//!
//! Every parallel map collects into index order before anything is summed,
//! so results are bit-identical to the serial core functions.

use std::collections::HashMap;
use std::sync::RwLock;

use rabit_core::allocation::{allocation_gini, allocation_proportions};
use rabit_core::design::enumerate_masks;
use rabit_core::inference::{
    assemble, canonical_null_spec, mask_breakdown, pooled_threshold, solve_sample_size, MaskTerm, SampleSize,
    TypeOneModel,
};
use rabit_core::operations::{mask_operations, summarize};
use rabit_core::simulation::{check_replicates, Accumulator, SimulationMode, Simulator};
use rabit_core::tail::Backend;
use rabit_core::{
    AccrualPlan, BasketMask, DesignSpec, InferenceResult, OperationalForecast, Result,
    SimulationSummary, TailSettings,
};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct AlphaKey {
    proportions: Vec<u64>,
    info_time: u64,
    alpha: u64,
    alpha_interim: u64,
    tolerance: u64,
    backend: u8,
    seed: u64,
}

impl AlphaKey {
    fn new(spec: &DesignSpec, settings: &TailSettings) -> Self {
        let canonical = canonical_null_spec(spec);
        AlphaKey {
            proportions: canonical.proportions.iter().map(|p| p.to_bits()).collect(),
            info_time: spec.info_time.to_bits(),
            alpha: spec.alpha.to_bits(),
            alpha_interim: spec.alpha_interim.to_bits(),
            tolerance: settings.tolerance.to_bits(),
            backend: match settings.backend {
                Backend::Auto => 0,
                Backend::Quadrature => 1,
                Backend::QuasiMonteCarlo => 2,
            },
            seed: settings.seed,
        }
    }
}

/// One allocation of a sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub allocation: Vec<u64>,
    pub gini: f64,
    pub alpha_star: f64,
    pub power: f64,
}

#[derive(Debug, Default)]
pub struct Engine {
    cache: RwLock<HashMap<AlphaKey, f64>>,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of cached `α*` values.
    pub fn cached(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// `α*` for the design; equal to `inference::solve_alpha_star`.
    pub fn alpha_star(&self, spec: &DesignSpec, settings: &TailSettings) -> Result<f64> {
        settings.validate()?;
        let key = AlphaKey::new(spec, settings);
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(v);
        }
        let canonical = canonical_null_spec(spec);
        let null = canonical.null_mask();
        let masks: Vec<BasketMask> = enumerate_masks(spec.k)?.filter(|m| !m.is_empty()).collect();
        let terms = masks
            .par_iter()
            .map(|&m| MaskTerm::prepare(&canonical, m, null, settings))
            .collect::<Result<Vec<_>>>()?;
        let value = TypeOneModel::from_terms(spec, terms).solve()?;
        if let Ok(mut c) = self.cache.write() {
            c.insert(key, value);
        }
        Ok(value)
    }

    /// Solves `α*` and evaluates the design under its active vector.
    pub fn evaluate(&self, spec: &DesignSpec, settings: &TailSettings) -> Result<InferenceResult> {
        let alpha_star = self.alpha_star(spec, settings)?;
        self.evaluate_at(spec, alpha_star, settings)
    }

    pub fn evaluate_at(
        &self,
        spec: &DesignSpec,
        alpha_star: f64,
        settings: &TailSettings,
    ) -> Result<InferenceResult> {
        let g = spec.active_mask();
        let masks: Vec<BasketMask> = enumerate_masks(spec.k)?.collect();
        let rows = masks
            .par_iter()
            .map(|&m| mask_breakdown(spec, m, g, alpha_star, settings))
            .collect::<Result<Vec<_>>>()?;
        assemble(spec, alpha_star, rows)
    }

    /// Power under `g`; equal to `inference::overall_power`.
    pub fn power(
        &self,
        spec: &DesignSpec,
        g: BasketMask,
        alpha_star: f64,
        settings: &TailSettings,
    ) -> Result<f64> {
        let masks: Vec<BasketMask> = enumerate_masks(spec.k)?.filter(|m| !m.is_empty()).collect();
        let z = pooled_threshold(alpha_star)?;
        let terms = masks
            .par_iter()
            .map(|&m| MaskTerm::prepare(spec, m, g, settings).map(|t| t.eval(z)))
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        for t in terms {
            total += t;
        }
        Ok(total)
    }

    pub fn forecast(
        &self,
        spec: &DesignSpec,
        accrual: &AccrualPlan,
        g: BasketMask,
    ) -> Result<OperationalForecast> {
        spec.check_mask(g)?;
        let masks: Vec<BasketMask> = enumerate_masks(spec.k)?.collect();
        let rows = masks
            .par_iter()
            .map(|&m| mask_operations(spec, accrual, m, g))
            .collect::<Result<Vec<_>>>()?;
        Ok(summarize(spec.k, rows))
    }

    /// One sweep row: the base design with proportions taken from `allocation`.
    pub fn sweep_row(
        &self,
        base: &DesignSpec,
        allocation: &[u64],
        settings: &TailSettings,
    ) -> Result<SweepRow> {
        let mut spec = base.clone();
        spec.n_total = allocation.iter().sum::<u64>() as f64;
        spec.proportions = allocation_proportions(allocation);
        let alpha_star = self.alpha_star(&spec, settings)?;
        let power = self.power(&spec, spec.active_mask(), alpha_star, settings)?;
        Ok(SweepRow {
            allocation: allocation.to_vec(),
            gini: allocation_gini(allocation),
            alpha_star,
            power,
        })
    }

    /// Rows for `allocations`, computed in parallel and returned in order.
    pub fn sweep_rows(
        &self,
        base: &DesignSpec,
        allocations: &[Vec<u64>],
        settings: &TailSettings,
    ) -> Result<Vec<SweepRow>> {
        allocations
            .par_iter()
            .map(|a| self.sweep_row(base, a, settings))
            .collect()
    }

    pub fn sample_size(
        &self,
        spec: &DesignSpec,
        target: f64,
        n_max: f64,
        settings: &TailSettings,
    ) -> Result<SampleSize> {
        solve_sample_size(spec, spec.active_mask(), target, n_max, settings)
    }

    /// Monte Carlo run with chunks in parallel, merged in chunk order.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate(
        &self,
        spec: &DesignSpec,
        g: BasketMask,
        alpha_star: f64,
        mode: SimulationMode,
        accrual: Option<AccrualPlan>,
        replicates: u64,
        seed: u64,
    ) -> Result<SimulationSummary> {
        check_replicates(replicates)?;
        let sim = Simulator::new(spec, g, alpha_star, mode, accrual)?;
        let chunks: Vec<Accumulator> = (0..Simulator::chunk_count(replicates))
            .into_par_iter()
            .map(|c| sim.run_chunk(seed, replicates, c))
            .collect();
        let mut total = Accumulator::default();
        for c in &chunks {
            total.merge(c);
        }
        Ok(total.summary(seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rabit_core::inference;

    fn spec() -> DesignSpec {
        let mut s = DesignSpec::equal_allocation(3, 150.0, 0.5, 0.5, 0.025, 0.3);
        s.proportions = vec![0.2, 0.5, 0.3];
        s.effect_sizes = vec![0.3, 0.5, 0.0];
        s.active = vec![true, true, false];
        s
    }

    #[test]
    fn parallel_matches_serial_bit_for_bit() {
        let e = Engine::new();
        let st = TailSettings::default();
        let s = spec();
        assert_eq!(e.evaluate(&s, &st).unwrap(), inference::evaluate(&s, &st).unwrap());
        let a = e.alpha_star(&s, &st).unwrap();
        assert_eq!(
            e.power(&s, s.active_mask(), a, &st).unwrap(),
            inference::overall_power(&s, s.active_mask(), a, &st).unwrap()
        );
        let acc = AccrualPlan::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            e.forecast(&s, &acc, s.active_mask()).unwrap(),
            rabit_core::operations::operational_forecast(&s, &acc, s.active_mask()).unwrap()
        );
        let sim = e
            .simulate(&s, s.active_mask(), a, SimulationMode::Statistic, None, 10_000, 7)
            .unwrap();
        assert_eq!(sim, serial_estimate(&s, a));
    }

    fn serial_estimate(s: &DesignSpec, a: f64) -> SimulationSummary {
        Simulator::new(s, s.active_mask(), a, SimulationMode::Statistic, None)
            .unwrap()
            .estimate(10_000, 7)
            .unwrap()
    }

    #[test]
    fn cache_is_order_invariant() {
        let e = Engine::new();
        let st = TailSettings::default();
        let s = spec();
        let a = e.alpha_star(&s, &st).unwrap();
        let mut r = s.clone();
        r.proportions.reverse();
        assert_eq!(e.alpha_star(&r, &st).unwrap(), a);
        assert_eq!(e.cached(), 1);
    }
}
