//! Type-1 error accounting, the `α*` solve, power and sample size.

use alloc::vec::Vec;

use crate::design::{enumerate_masks, BasketMask, DesignSpec};
use crate::error::{Error, Result};
use crate::normal;
use crate::root::bisect_increasing;
use crate::tail::{build_joint_law, interim_pass_probability, TailKernel, TailSettings};

/// Lower end of the `α*` search bracket.
pub const ALPHA_STAR_FLOOR: f64 = 1e-12;
/// Largest planned sample size tried by [`solve_sample_size`] by default.
pub const DEFAULT_N_MAX: f64 = 1e6;

const ALPHA_STAR_ITERATIONS: usize = 60;
const ALPHA_STAR_RESIDUAL: f64 = 1e-10;

/// One row of the per-mask breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskBreakdown {
    pub mask: BasketMask,
    pub null_contribution: f64,
    pub power_contribution: f64,
    /// Probability of this interim outcome under the active vector.
    pub mask_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub alpha_star: f64,
    /// Overall type-1 error at `alpha_star`.
    pub type1: f64,
    pub power: f64,
    /// Every mask in binary counting order, the empty mask first.
    pub per_mask: Vec<MaskBreakdown>,
    pub z_t: f64,
    pub z_star: f64,
}

/// Probability that basket pruning outcomes outside `m` occur:
/// `Π_{i∉id(m)} P(Y_i1 < z_t)`.
fn pruned_factor(spec: &DesignSpec, m: BasketMask, g: BasketMask) -> Result<f64> {
    let mut prod = 1.0;
    for i in m.complement().indices() {
        prod *= 1.0 - interim_pass_probability(spec, i, g)?;
    }
    Ok(prod)
}

/// `Z_{1−α*}`, with `±∞` at the ends of `[0, 1]`.
pub fn pooled_threshold(alpha_star: f64) -> Result<f64> {
    if alpha_star >= 1.0 {
        Ok(f64::NEG_INFINITY)
    } else if alpha_star <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        normal::upper_critical(alpha_star)
    }
}

/// The design with proportions sorted ascending. The null model is symmetric
/// in the baskets, so `α*` computed from it is exactly order-invariant.
pub fn canonical_null_spec(spec: &DesignSpec) -> DesignSpec {
    let mut s = spec.clone();
    s.proportions.sort_by(f64::total_cmp);
    s
}

/// One mask's joint tail, prepared once and weighted by the probability
/// that every other basket is pruned.
#[derive(Debug, Clone)]
pub struct MaskTerm {
    pub mask: BasketMask,
    pub factor: f64,
    kernel: TailKernel,
}

impl MaskTerm {
    /// Term for a non-empty mask `m` under active vector `g`.
    pub fn prepare(
        spec: &DesignSpec,
        m: BasketMask,
        g: BasketMask,
        settings: &TailSettings,
    ) -> Result<Self> {
        let z_t = normal::upper_critical(spec.alpha_interim)?;
        let law = build_joint_law(spec, m, g)?;
        let kernel = TailKernel::prepare(&law, z_t, settings)?;
        Ok(MaskTerm { mask: m, factor: pruned_factor(spec, m, g)?, kernel })
    }

    /// Contribution at pooled threshold `z_star`.
    pub fn eval(&self, z_star: f64) -> f64 {
        self.factor * self.kernel.eval(z_star)
    }
}

/// The overall type-1 error as a function of `α*`, with all kernels prepared.
#[derive(Debug, Clone)]
pub struct TypeOneModel {
    alpha: f64,
    attainable: f64,
    terms: Vec<MaskTerm>,
}

impl TypeOneModel {
    pub fn prepare(spec: &DesignSpec, settings: &TailSettings) -> Result<Self> {
        let canonical = canonical_null_spec(spec);
        let null = canonical.null_mask();
        let terms = enumerate_masks(spec.k)?
            .filter(|m| !m.is_empty())
            .map(|m| MaskTerm::prepare(&canonical, m, null, settings))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_terms(spec, terms))
    }

    /// Assembles a model from terms prepared elsewhere (e.g. in parallel).
    /// Terms are summed in the order given.
    pub fn from_terms(spec: &DesignSpec, terms: Vec<MaskTerm>) -> Self {
        let attainable = 1.0 - libm::pow(1.0 - spec.alpha_interim, spec.k as f64);
        TypeOneModel { alpha: spec.alpha, attainable, terms }
    }

    pub fn terms(&self) -> &[MaskTerm] {
        &self.terms
    }

    /// `1 − (1−α_t)^K`, the type-1 error when the pooled test always rejects.
    pub fn attainable(&self) -> f64 {
        self.attainable
    }

    pub fn total(&self, alpha_star: f64) -> Result<f64> {
        let z = pooled_threshold(alpha_star)?;
        Ok(self.terms.iter().map(|t| t.eval(z)).sum())
    }

    pub fn solve(&self) -> Result<f64> {
        if !(self.alpha < self.attainable) {
            return Err(Error::NoRoot { alpha: self.alpha, attainable: self.attainable });
        }
        let f = |a: f64| {
            let z = normal::isf_unchecked(a);
            self.terms.iter().map(|t| t.eval(z)).sum::<f64>() - self.alpha
        };
        let r = bisect_increasing(
            f,
            ALPHA_STAR_FLOOR,
            1.0 - ALPHA_STAR_FLOOR,
            ALPHA_STAR_RESIDUAL,
            0.0,
            ALPHA_STAR_ITERATIONS,
        );
        Ok(r.root)
    }
}

/// Null-hypothesis contribution of mask `m`; zero for the empty mask.
pub fn null_mask_probability(
    spec: &DesignSpec,
    m: BasketMask,
    alpha_star: f64,
    settings: &TailSettings,
) -> Result<f64> {
    spec.check_mask(m)?;
    if m.is_empty() {
        return Ok(0.0);
    }
    let term = MaskTerm::prepare(spec, m, spec.null_mask(), settings)?;
    Ok(term.eval(pooled_threshold(alpha_star)?))
}

/// Overall type-1 error at `alpha_star`.
pub fn total_type1(spec: &DesignSpec, alpha_star: f64, settings: &TailSettings) -> Result<f64> {
    TypeOneModel::prepare(spec, settings)?.total(alpha_star)
}

/// Final threshold that spends exactly `α` across all masks.
///
/// `α*` does not depend on `N` or the effect sizes.
pub fn solve_alpha_star(spec: &DesignSpec, settings: &TailSettings) -> Result<f64> {
    let model = TypeOneModel::prepare(spec, settings)?;
    model.solve()
}

/// Probability that exactly the baskets in `m` pass the interim under `g`.
pub fn mask_probability(spec: &DesignSpec, m: BasketMask, g: BasketMask) -> Result<f64> {
    spec.check_mask(m)?;
    let mut prod = 1.0;
    for i in 0..spec.k {
        let pass = interim_pass_probability(spec, i, g)?;
        prod *= if m.contains(i) { pass } else { 1.0 - pass };
    }
    Ok(prod)
}

/// Contribution of mask `m` to the power under `g`; zero for the empty mask.
///
/// Truly active pruned baskets contribute `Φ(z_t − Δ_i √(N p_i t / 4))` and
/// truly inactive pruned baskets contribute `1 − α_t`.
pub fn power_mask_contribution(
    spec: &DesignSpec,
    m: BasketMask,
    g: BasketMask,
    alpha_star: f64,
    settings: &TailSettings,
) -> Result<f64> {
    spec.check_mask(m)?;
    if m.is_empty() {
        return Ok(0.0);
    }
    let term = MaskTerm::prepare(spec, m, g, settings)?;
    Ok(term.eval(pooled_threshold(alpha_star)?))
}

/// Overall power under `g` at `alpha_star`.
pub fn overall_power(
    spec: &DesignSpec,
    g: BasketMask,
    alpha_star: f64,
    settings: &TailSettings,
) -> Result<f64> {
    let z = pooled_threshold(alpha_star)?;
    let mut total = 0.0;
    for m in enumerate_masks(spec.k)?.filter(|m| !m.is_empty()) {
        total += MaskTerm::prepare(spec, m, g, settings)?.eval(z);
    }
    Ok(total)
}

/// Full evaluation under the spec's active vector, solving `α*`.
pub fn evaluate(spec: &DesignSpec, settings: &TailSettings) -> Result<InferenceResult> {
    let alpha_star = solve_alpha_star(spec, settings)?;
    evaluate_at(spec, alpha_star, settings)
}

/// Full evaluation at a known `α*`.
pub fn evaluate_at(
    spec: &DesignSpec,
    alpha_star: f64,
    settings: &TailSettings,
) -> Result<InferenceResult> {
    let g = spec.active_mask();
    let rows = enumerate_masks(spec.k)?
        .map(|m| mask_breakdown(spec, m, g, alpha_star, settings))
        .collect::<Result<Vec<_>>>()?;
    assemble(spec, alpha_star, rows)
}

/// One row of [`InferenceResult::per_mask`].
pub fn mask_breakdown(
    spec: &DesignSpec,
    m: BasketMask,
    g: BasketMask,
    alpha_star: f64,
    settings: &TailSettings,
) -> Result<MaskBreakdown> {
    Ok(MaskBreakdown {
        mask: m,
        null_contribution: null_mask_probability(spec, m, alpha_star, settings)?,
        power_contribution: power_mask_contribution(spec, m, g, alpha_star, settings)?,
        mask_probability: mask_probability(spec, m, g)?,
    })
}

/// Sums per-mask rows (in the order given) into a result.
pub fn assemble(
    spec: &DesignSpec,
    alpha_star: f64,
    per_mask: Vec<MaskBreakdown>,
) -> Result<InferenceResult> {
    let type1 = per_mask.iter().map(|r| r.null_contribution).sum();
    let power = per_mask.iter().map(|r| r.power_contribution).sum();
    Ok(InferenceResult {
        alpha_star,
        type1,
        power,
        per_mask,
        z_t: normal::upper_critical(spec.alpha_interim)?,
        z_star: pooled_threshold(alpha_star)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSize {
    pub n_total: u64,
    pub power: f64,
    pub alpha_star: f64,
}

/// Smallest integer `N` with power under `g` at least `target`.
///
/// `spec.n_total` is ignored. `α*` is solved once since it does not depend
/// on `N`.
pub fn solve_sample_size(
    spec: &DesignSpec,
    g: BasketMask,
    target: f64,
    n_max: f64,
    settings: &TailSettings,
) -> Result<SampleSize> {
    if !(target > spec.alpha && target < 1.0) {
        return Err(Error::InvalidTarget(target));
    }
    spec.check_mask(g)?;
    let alpha_star = solve_alpha_star(spec, settings)?;
    let power_at = |n: f64| -> Result<f64> {
        let mut s = spec.clone();
        s.n_total = n;
        overall_power(&s, g, alpha_star, settings)
    };

    let top = power_at(n_max)?;
    if top < target {
        return Err(Error::Unattainable { target, n_max, power: top });
    }
    let mut lo = 1.0;
    let mut hi = 16.0_f64.min(n_max);
    while power_at(hi)? < target {
        lo = hi;
        hi = (hi * 2.0).min(n_max);
    }
    while hi - lo > 0.5 {
        let mid = 0.5 * (lo + hi);
        if power_at(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut n = libm::ceil(hi).max(1.0);
    let mut power = power_at(n)?;
    while n > 1.0 {
        let below = power_at(n - 1.0)?;
        if below < target {
            break;
        }
        n -= 1.0;
        power = below;
    }
    while power < target && n < n_max {
        n += 1.0;
        power = power_at(n)?;
    }
    Ok(SampleSize { n_total: n as u64, power, alpha_star })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2(k: usize) -> DesignSpec {
        DesignSpec::equal_allocation(k, 150.0, 0.5, 0.5, 0.025, 0.3)
    }

    #[test]
    fn empty_mask_contributes_nothing() {
        let spec = table2(2);
        let s = TailSettings::default();
        let e = BasketMask::empty(2);
        assert_eq!(null_mask_probability(&spec, e, 0.02, &s).unwrap(), 0.0);
        assert_eq!(power_mask_contribution(&spec, e, spec.active_mask(), 0.02, &s).unwrap(), 0.0);
    }

    #[test]
    fn type1_limits() {
        let spec = table2(3);
        let s = TailSettings::default();
        let all = total_type1(&spec, 1.0, &s).unwrap();
        assert!((all - (1.0 - 0.7f64.powi(3))).abs() < 1e-12);
        assert_eq!(total_type1(&spec, 0.0, &s).unwrap(), 0.0);
    }

    #[test]
    fn no_root_when_alpha_too_large() {
        let mut spec = table2(2);
        spec.alpha = 0.6;
        match solve_alpha_star(&spec, &TailSettings::default()) {
            Err(Error::NoRoot { attainable, .. }) => assert!((attainable - 0.51).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mask_probabilities_sum_to_one() {
        let spec = table2(3);
        let g = spec.active_mask();
        let total: f64 = enumerate_masks(3)
            .unwrap()
            .map(|m| mask_probability(&spec, m, g).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        let null_full = mask_probability(&spec, BasketMask::full(3), BasketMask::empty(3)).unwrap();
        assert!((null_full - 0.027).abs() < 1e-15);
    }

    #[test]
    fn solved_alpha_star_spends_alpha() {
        let spec = table2(2);
        let s = TailSettings::default();
        let a = solve_alpha_star(&spec, &s).unwrap();
        assert!((total_type1(&spec, a, &s).unwrap() - 0.025).abs() < 1e-9);
        assert!((a - 0.0143).abs() < 5e-4);
    }

    #[test]
    fn sample_size_fixed_point() {
        let spec = table2(2);
        let s = TailSettings::with_tolerance(1e-6);
        let a = solve_alpha_star(&spec, &s).unwrap();
        let p150 = overall_power(&spec, spec.active_mask(), a, &s).unwrap();
        let r = solve_sample_size(&spec, spec.active_mask(), p150, DEFAULT_N_MAX, &s).unwrap();
        assert_eq!(r.n_total, 150);
        assert!(matches!(
            solve_sample_size(&spec, spec.active_mask(), 0.01, DEFAULT_N_MAX, &s),
            Err(Error::InvalidTarget(_))
        ));
    }
}
