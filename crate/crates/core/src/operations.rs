//! Trial duration and participant forecasts under a constant accrual model.
//!
//! Every basket recruits from time zero at its own rate. A basket that fails
//! its interim stops as soon as its interim sample is complete; its remaining
//! share of `N` is handed to the survivors in proportion to their allocation.
//! Survivors pass through their own interim without pausing.

use alloc::vec::Vec;

use crate::design::{enumerate_masks, BasketMask, DesignSpec};
use crate::error::{Error, Result};
use crate::inference::mask_probability;

/// Two-sided 95% normal multiplier.
pub const Z_95: f64 = 1.96;

/// Per-basket accrual rates in persons per month.
#[derive(Debug, Clone, PartialEq)]
pub struct AccrualPlan {
    rates: Vec<f64>,
}

impl AccrualPlan {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidAccrual("at least one rate is required"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidAccrual("rates must be positive and finite"));
        }
        Ok(AccrualPlan { rates })
    }

    pub fn uniform(k: usize, rate: f64) -> Result<Self> {
        Self::new(alloc::vec![rate; k])
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn check(&self, spec: &DesignSpec) -> Result<()> {
        if self.rates.len() == spec.k {
            Ok(())
        } else {
            Err(Error::InvalidAccrual("one rate per basket is required"))
        }
    }
}

/// Interim completion time `N p_i t / A_i` of basket `i`.
fn interim_time(spec: &DesignSpec, accrual: &AccrualPlan, i: usize) -> f64 {
    spec.n_total * spec.proportions[i] * spec.info_time / accrual.rates[i]
}

/// Completion time of each survivor of a non-empty mask, in index order.
pub fn survivor_completion_times(
    spec: &DesignSpec,
    accrual: &AccrualPlan,
    m: BasketMask,
) -> Result<Vec<(usize, f64)>> {
    spec.check_mask(m)?;
    accrual.check(spec)?;
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    // Pruning events (time, proportion released), merged when simultaneous.
    let mut events: Vec<(f64, f64)> = m
        .complement()
        .indices()
        .map(|j| (interim_time(spec, accrual, j), spec.proportions[j]))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(events.len());
    for (t, q) in events {
        match merged.last_mut() {
            Some(last) if last.0 == t => last.1 += q,
            _ => merged.push((t, q)),
        }
    }

    let n = spec.n_total;
    Ok(m.indices()
        .map(|i| {
            let rate = accrual.rates[i];
            let share = n * spec.proportions[i];
            let (mut time, mut accrued, mut target, mut released) = (0.0, 0.0, share, 0.0);
            for &(at, q) in &merged {
                accrued = (accrued + rate * (at - time)).min(target);
                time = at;
                released += q;
                target = share / (1.0 - released);
            }
            (i, time + (target - accrued) / rate)
        })
        .collect())
}

/// Trial duration when exactly the baskets in `m` survive the interim.
pub fn mask_duration(spec: &DesignSpec, accrual: &AccrualPlan, m: BasketMask) -> Result<f64> {
    spec.check_mask(m)?;
    accrual.check(spec)?;
    if m.is_empty() {
        return Ok((0..spec.k).map(|i| interim_time(spec, accrual, i)).fold(0.0, f64::max));
    }
    Ok(survivor_completion_times(spec, accrual, m)?
        .into_iter()
        .map(|(_, t)| t)
        .fold(0.0, f64::max))
}

/// Participants enrolled when exactly the baskets in `m` survive:
/// `N + Σ_{i∉id(m)} N p_i t`, or `N t` when every basket is pruned.
pub fn mask_participants(spec: &DesignSpec, m: BasketMask) -> Result<f64> {
    spec.check_mask(m)?;
    let interim: f64 = m
        .complement()
        .indices()
        .map(|i| spec.n_total * spec.proportions[i] * spec.info_time)
        .sum();
    if m.is_empty() {
        Ok(interim)
    } else {
        Ok(spec.n_total + interim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    fn around(mean: f64, half_width: f64) -> Self {
        Interval { lower: mean - half_width, upper: mean + half_width }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskOperations {
    pub mask: BasketMask,
    pub probability: f64,
    pub duration: f64,
    pub participants: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperationalForecast {
    pub expected_duration: f64,
    pub expected_participants: f64,
    pub duration_variance: f64,
    pub participants_variance: f64,
    /// `mean ± 1.96 √(Var / 2^K)`.
    pub duration_ci: Interval,
    pub participants_ci: Interval,
    /// `mean ± 1.96 √Var`.
    pub duration_ci_unscaled: Interval,
    pub participants_ci_unscaled: Interval,
    pub per_mask: Vec<MaskOperations>,
}

pub fn mask_operations(
    spec: &DesignSpec,
    accrual: &AccrualPlan,
    m: BasketMask,
    g: BasketMask,
) -> Result<MaskOperations> {
    Ok(MaskOperations {
        mask: m,
        probability: mask_probability(spec, m, g)?,
        duration: mask_duration(spec, accrual, m)?,
        participants: mask_participants(spec, m)?,
    })
}

pub fn operational_forecast(
    spec: &DesignSpec,
    accrual: &AccrualPlan,
    g: BasketMask,
) -> Result<OperationalForecast> {
    accrual.check(spec)?;
    spec.check_mask(g)?;
    let rows = enumerate_masks(spec.k)?
        .map(|m| mask_operations(spec, accrual, m, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(spec.k, rows))
}

/// Moments and intervals from per-mask rows, summed in the order given.
pub fn summarize(k: usize, per_mask: Vec<MaskOperations>) -> OperationalForecast {
    let moments = |value: fn(&MaskOperations) -> f64| {
        let mean: f64 = per_mask.iter().map(|r| r.probability * value(r)).sum();
        let second: f64 = per_mask.iter().map(|r| r.probability * value(r) * value(r)).sum();
        (mean, (second - mean * mean).max(0.0))
    };
    let (ed, vd) = moments(|r| r.duration);
    let (ep, vp) = moments(|r| r.participants);
    let scale = libm::sqrt(libm::ldexp(1.0, k as i32));
    OperationalForecast {
        expected_duration: ed,
        expected_participants: ep,
        duration_variance: vd,
        participants_variance: vp,
        duration_ci: Interval::around(ed, Z_95 * libm::sqrt(vd) / scale),
        participants_ci: Interval::around(ep, Z_95 * libm::sqrt(vp) / scale),
        duration_ci_unscaled: Interval::around(ed, Z_95 * libm::sqrt(vd)),
        participants_ci_unscaled: Interval::around(ep, Z_95 * libm::sqrt(vp)),
        per_mask,
    }
}
