//! Domain types for a two-stage basket design and the bookkeeping around them.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result, Violations};

/// Hard cap on the number of baskets; every analytic sum runs over `2^K` masks.
pub const MAX_BASKETS: usize = 20;

/// Proportion sums within this distance of one are silently renormalized.
pub const PROPORTION_SUM_SLACK: f64 = 1e-9;

/// Full parameterization of a design. Randomization is always 1:1 within a basket.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub k: usize,
    /// Planned pooled sample size `N`. Continuous: nothing analytic rounds it.
    pub n_total: f64,
    pub proportions: Vec<f64>,
    /// Standardized effect sizes, one per basket.
    pub effect_sizes: Vec<f64>,
    /// Baskets that are truly active under the alternative.
    pub active: Vec<bool>,
    pub info_time: f64,
    pub alpha: f64,
    pub alpha_interim: f64,
}

/// A single violated invariant of [`DesignSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoBaskets,
    TooManyBaskets { k: usize },
    LengthMismatch { field: &'static str, expected: usize, found: usize },
    NonFinite { field: &'static str },
    NonPositiveSampleSize { value: f64 },
    NonPositiveProportion { index: usize, value: f64 },
    ProportionSumMismatch { sum: f64 },
    NegativeEffectSize { index: usize, value: f64 },
    InfoTimeOutOfRange { value: f64 },
    AlphaOutOfRange { value: f64 },
    InterimAlphaOutOfRange { value: f64 },
}

impl Violation {
    /// Stable name of the invariant, e.g. `"ProportionSumMismatch"`.
    pub fn name(&self) -> &'static str {
        match self {
            Violation::NoBaskets => "NoBaskets",
            Violation::TooManyBaskets { .. } => "TooManyBaskets",
            Violation::LengthMismatch { .. } => "LengthMismatch",
            Violation::NonFinite { .. } => "NonFinite",
            Violation::NonPositiveSampleSize { .. } => "NonPositiveSampleSize",
            Violation::NonPositiveProportion { .. } => "NonPositiveProportion",
            Violation::ProportionSumMismatch { .. } => "ProportionSumMismatch",
            Violation::NegativeEffectSize { .. } => "NegativeEffectSize",
            Violation::InfoTimeOutOfRange { .. } => "InfoTimeOutOfRange",
            Violation::AlphaOutOfRange { .. } => "AlphaOutOfRange",
            Violation::InterimAlphaOutOfRange { .. } => "InterimAlphaOutOfRange",
        }
    }

    /// The design field the violation is about, as used in config files.
    pub fn field(&self) -> &'static str {
        match self {
            Violation::NoBaskets | Violation::TooManyBaskets { .. } => "k",
            Violation::LengthMismatch { field, .. } | Violation::NonFinite { field } => field,
            Violation::NonPositiveSampleSize { .. } => "n_total",
            Violation::NonPositiveProportion { .. } | Violation::ProportionSumMismatch { .. } => {
                "proportions"
            }
            Violation::NegativeEffectSize { .. } => "effect_sizes",
            Violation::InfoTimeOutOfRange { .. } => "info_time",
            Violation::AlphaOutOfRange { .. } => "alpha",
            Violation::InterimAlphaOutOfRange { .. } => "alpha_interim",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoBaskets => write!(f, "NoBaskets: k must be at least 1"),
            Violation::TooManyBaskets { k } => {
                write!(f, "TooManyBaskets: k = {k} exceeds {MAX_BASKETS}")
            }
            Violation::LengthMismatch { field, expected, found } => write!(
                f,
                "LengthMismatch: {field} has {found} entries, expected {expected}"
            ),
            Violation::NonFinite { field } => write!(f, "NonFinite: {field} contains a non-finite value"),
            Violation::NonPositiveSampleSize { value } => {
                write!(f, "NonPositiveSampleSize: n_total = {value}")
            }
            Violation::NonPositiveProportion { index, value } => {
                write!(f, "NonPositiveProportion: proportions[{index}] = {value}")
            }
            Violation::ProportionSumMismatch { sum } => {
                write!(f, "ProportionSumMismatch: proportions sum to {sum}")
            }
            Violation::NegativeEffectSize { index, value } => {
                write!(f, "NegativeEffectSize: effect_sizes[{index}] = {value}")
            }
            Violation::InfoTimeOutOfRange { value } => {
                write!(f, "InfoTimeOutOfRange: info_time = {value} not in (0, 1]")
            }
            Violation::AlphaOutOfRange { value } => {
                write!(f, "AlphaOutOfRange: alpha = {value} not in (0, 1)")
            }
            Violation::InterimAlphaOutOfRange { value } => {
                write!(f, "InterimAlphaOutOfRange: alpha_interim = {value} not in (0, 1)")
            }
        }
    }
}

impl DesignSpec {
    /// Design with equal allocation and every basket active at effect size `delta`.
    pub fn equal_allocation(
        k: usize,
        n_total: f64,
        delta: f64,
        info_time: f64,
        alpha: f64,
        alpha_interim: f64,
    ) -> Self {
        DesignSpec {
            k,
            n_total,
            proportions: alloc::vec![1.0 / k as f64; k],
            effect_sizes: alloc::vec![delta; k],
            active: alloc::vec![true; k],
            info_time,
            alpha,
            alpha_interim,
        }
    }

    /// Mask of the truly active baskets (`g`).
    pub fn active_mask(&self) -> BasketMask {
        BasketMask::from_bools(&self.active)
    }

    /// Same design with every basket forced inactive (the global null).
    pub fn null_mask(&self) -> BasketMask {
        BasketMask::empty(self.k)
    }

    pub fn check_mask(&self, mask: BasketMask) -> Result<()> {
        if mask.len() != self.k {
            return Err(Error::MaskLength { expected: self.k, found: mask.len() });
        }
        Ok(())
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let k = self.k;
        if k == 0 {
            out.push(Violation::NoBaskets);
        }
        if k > MAX_BASKETS {
            out.push(Violation::TooManyBaskets { k });
        }
        for (field, len) in [
            ("proportions", self.proportions.len()),
            ("effect_sizes", self.effect_sizes.len()),
            ("active", self.active.len()),
        ] {
            if len != k {
                out.push(Violation::LengthMismatch { field, expected: k, found: len });
            }
        }
        if !self.n_total.is_finite() {
            out.push(Violation::NonFinite { field: "n_total" });
        } else if self.n_total <= 0.0 {
            out.push(Violation::NonPositiveSampleSize { value: self.n_total });
        }
        if self.proportions.iter().any(|p| !p.is_finite()) {
            out.push(Violation::NonFinite { field: "proportions" });
        } else {
            for (index, &value) in self.proportions.iter().enumerate() {
                if value <= 0.0 {
                    out.push(Violation::NonPositiveProportion { index, value });
                }
            }
            let sum: f64 = self.proportions.iter().sum();
            if !self.proportions.is_empty() && libm::fabs(sum - 1.0) > PROPORTION_SUM_SLACK {
                out.push(Violation::ProportionSumMismatch { sum });
            }
        }
        if self.effect_sizes.iter().any(|d| !d.is_finite()) {
            out.push(Violation::NonFinite { field: "effect_sizes" });
        } else {
            for (index, &value) in self.effect_sizes.iter().enumerate() {
                if value < 0.0 {
                    out.push(Violation::NegativeEffectSize { index, value });
                }
            }
        }
        // NaN fails every comparison, so these also reject non-finite input.
        if !(self.info_time > 0.0 && self.info_time <= 1.0) {
            out.push(Violation::InfoTimeOutOfRange { value: self.info_time });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(Violation::AlphaOutOfRange { value: self.alpha });
        }
        if !(self.alpha_interim > 0.0 && self.alpha_interim < 1.0) {
            out.push(Violation::InterimAlphaOutOfRange { value: self.alpha_interim });
        }
        out
    }
}

/// Checks every [`DesignSpec`] invariant and renormalizes the proportions
/// exactly when their sum is within [`PROPORTION_SUM_SLACK`] of one.
pub fn validate_design(spec: DesignSpec) -> Result<DesignSpec> {
    let violations = spec.violations();
    if !violations.is_empty() {
        return Err(Error::InvalidDesign(Violations(violations)));
    }
    let mut spec = spec;
    let sum: f64 = spec.proportions.iter().sum();
    if sum != 1.0 {
        for p in &mut spec.proportions {
            *p /= sum;
        }
    }
    Ok(spec)
}

/// A subset of baskets stored as a bit vector (bit `i` is basket `i`).
///
/// Used for the interim survivors `m`, the truly active set `g`, and their
/// intersection `j`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasketMask {
    bits: u32,
    len: u8,
}

impl BasketMask {
    /// Panics if `len` exceeds 32; the design layer caps `K` at [`MAX_BASKETS`].
    pub fn from_bits(bits: u32, len: usize) -> Self {
        assert!(len <= 32, "basket masks hold at most 32 baskets");
        let keep = if len == 32 { u32::MAX } else { (1u32 << len) - 1 };
        BasketMask { bits: bits & keep, len: len as u8 }
    }

    pub fn empty(len: usize) -> Self {
        Self::from_bits(0, len)
    }

    pub fn full(len: usize) -> Self {
        Self::from_bits(u32::MAX, len)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let word = bits
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &b)| if b { acc | (1 << i) } else { acc });
        Self::from_bits(word, bits.len())
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn len(self) -> usize {
        self.len as usize
    }

    pub fn contains(self, i: usize) -> bool {
        i < self.len() && self.bits & (1 << i) != 0
    }

    /// Number of baskets in the set, `|id(m)|`.
    pub fn size(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn is_full(self) -> bool {
        self.size() == self.len()
    }

    /// Elementwise product, e.g. `j = m ⊙ g`.
    pub fn intersect(self, other: BasketMask) -> BasketMask {
        BasketMask::from_bits(self.bits & other.bits, self.len())
    }

    pub fn complement(self) -> BasketMask {
        BasketMask::from_bits(!self.bits, self.len())
    }

    /// Basket indices in the set, ascending: `id(m)`.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..self.len()).filter(move |&i| self.bits & (1 << i) != 0)
    }

    pub fn to_bools(self) -> Vec<bool> {
        (0..self.len()).map(|i| self.contains(i)).collect()
    }

    /// Dot product `m · p`.
    pub fn dot(self, values: &[f64]) -> f64 {
        self.indices().map(|i| values[i]).sum()
    }
}

impl fmt::Display for BasketMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.contains(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BasketMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BasketMask({self})")
    }
}

/// Every mask over `k` baskets in binary-counting order.
pub fn enumerate_masks(k: usize) -> Result<impl ExactSizeIterator<Item = BasketMask>> {
    if k > MAX_BASKETS {
        return Err(Error::TooManyBaskets { k, max: MAX_BASKETS });
    }
    Ok((0..1u32 << k).map(move |bits| BasketMask::from_bits(bits, k)))
}

/// Post-pruning share of the total sample for each surviving basket.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, basket: usize) -> Option<f64> {
        self.indices.iter().position(|&i| i == basket).map(|pos| self.weights[pos])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

/// `w_i = p_i / (m · p)` for every survivor `i`.
pub fn reallocation_weights(proportions: &[f64], mask: BasketMask) -> Result<WeightVector> {
    if mask.len() != proportions.len() {
        return Err(Error::MaskLength { expected: proportions.len(), found: mask.len() });
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let kept = mask.dot(proportions);
    let indices: Vec<usize> = mask.indices().collect();
    let weights = indices.iter().map(|&i| proportions[i] / kept).collect();
    Ok(WeightVector { indices, weights })
}

/// `1 − Σ p_i²`; larger means a more even allocation.
pub fn gini_impurity(proportions: &[f64]) -> f64 {
    1.0 - proportions.iter().map(|p| p * p).sum::<f64>()
}

/// Planned per-basket sample sizes at the interim and after reallocation.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSizes {
    /// `N p_i t` for every basket, pruned or not.
    pub interim: Vec<f64>,
    /// `(i, N w_i)` for every survivor; `None` when the mask is empty.
    pub final_sizes: Option<Vec<(usize, f64)>>,
}

pub fn stage_sample_sizes(spec: &DesignSpec, mask: BasketMask) -> Result<StageSizes> {
    spec.check_mask(mask)?;
    let interim = spec
        .proportions
        .iter()
        .map(|p| spec.n_total * p * spec.info_time)
        .collect();
    let final_sizes = if mask.is_empty() {
        None
    } else {
        let w = reallocation_weights(&spec.proportions, mask)?;
        Some(w.iter().map(|(i, wi)| (i, spec.n_total * wi)).collect())
    };
    Ok(StageSizes { interim, final_sizes })
}

/// Final per-survivor sizes; errors on an empty mask.
pub fn final_sample_sizes(spec: &DesignSpec, mask: BasketMask) -> Result<Vec<(usize, f64)>> {
    stage_sample_sizes(spec, mask)?.final_sizes.ok_or(Error::EmptyMask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn table2_design() -> DesignSpec {
        DesignSpec::equal_allocation(3, 150.0, 0.5, 0.5, 0.025, 0.3)
    }

    fn names(err: Error) -> Vec<&'static str> {
        match err {
            Error::InvalidDesign(v) => v.iter().map(Violation::name).collect(),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn accepts_table2_design() {
        let spec = validate_design(table2_design()).unwrap();
        assert_eq!(spec.k, 3);
    }

    #[test]
    fn rejects_bad_proportion_sum() {
        let mut spec = DesignSpec::equal_allocation(2, 150.0, 0.5, 0.5, 0.025, 0.3);
        spec.proportions = vec![0.5, 0.6];
        assert_eq!(names(validate_design(spec).unwrap_err()), ["ProportionSumMismatch"]);
    }

    #[test]
    fn rejects_zero_info_time() {
        let mut spec = table2_design();
        spec.info_time = 0.0;
        assert_eq!(names(validate_design(spec).unwrap_err()), ["InfoTimeOutOfRange"]);
    }

    #[test]
    fn reports_every_violation() {
        let mut spec = table2_design();
        spec.proportions = vec![0.0, 0.5, 0.6];
        spec.alpha = 1.0;
        spec.effect_sizes = vec![0.5, -0.1, 0.5];
        let got = names(validate_design(spec).unwrap_err());
        assert_eq!(
            got,
            [
                "NonPositiveProportion",
                "ProportionSumMismatch",
                "NegativeEffectSize",
                "AlphaOutOfRange"
            ]
        );
    }

    #[test]
    fn renormalizes_within_slack() {
        let mut spec = table2_design();
        spec.proportions = vec![0.5 + 4e-10, 0.25, 0.25];
        let spec = validate_design(spec).unwrap();
        let sum: f64 = spec.proportions.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn length_mismatch_names_field() {
        let mut spec = table2_design();
        spec.active = vec![true];
        let err = validate_design(spec).unwrap_err();
        let Error::InvalidDesign(v) = err else { panic!() };
        assert_eq!(v.0[0].field(), "active");
    }

    #[test]
    fn weights_examples() {
        let third = 1.0 / 3.0;
        let w = reallocation_weights(&[third; 3], BasketMask::from_bools(&[true, true, false])).unwrap();
        assert_eq!(w.indices(), &[0, 1]);
        assert!((w.weights()[0] - 0.5).abs() < 1e-15 && (w.weights()[1] - 0.5).abs() < 1e-15);

        let w = reallocation_weights(&[0.2, 0.4, 0.4], BasketMask::from_bools(&[false, true, true]))
            .unwrap();
        assert_eq!(w.weights(), &[0.5, 0.5]);

        let p = [0.1, 0.2, 0.3, 0.4];
        let w = reallocation_weights(&p, BasketMask::full(4)).unwrap();
        for (a, b) in w.weights().iter().zip(p) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_need_survivors() {
        assert_eq!(
            reallocation_weights(&[0.5, 0.5], BasketMask::empty(2)),
            Err(Error::EmptyMask)
        );
    }

    #[test]
    fn gini_examples() {
        assert!((gini_impurity(&[1.0 / 3.0; 3]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(gini_impurity(&[0.5, 0.5]), 0.5);
        assert_eq!(gini_impurity(&[1.0]), 0.0);
    }

    #[test]
    fn mask_enumeration_order() {
        let masks: Vec<_> = enumerate_masks(2).unwrap().map(|m| m.to_bools()).collect();
        assert_eq!(
            masks,
            [
                vec![false, false],
                vec![true, false],
                vec![false, true],
                vec![true, true]
            ]
        );
        assert_eq!(enumerate_masks(3).unwrap().len(), 8);
        assert!(matches!(enumerate_masks(21), Err(Error::TooManyBaskets { k: 21, .. })));
    }

    #[test]
    fn mask_basics() {
        let m = BasketMask::from_bools(&[true, false, true]);
        assert_eq!(m.size(), 2);
        assert_eq!(m.indices().collect::<Vec<_>>(), [0, 2]);
        assert_eq!(m.complement().indices().collect::<Vec<_>>(), [1]);
        assert_eq!(alloc::format!("{m}"), "101");
        let g = BasketMask::from_bools(&[true, true, false]);
        assert_eq!(m.intersect(g).indices().collect::<Vec<_>>(), [0]);
    }

    #[test]
    fn stage_sizes_examples() {
        let spec = table2_design();
        let sizes = stage_sample_sizes(&spec, BasketMask::full(3)).unwrap();
        for s in &sizes.interim {
            assert!((s - 25.0).abs() < 1e-12);
        }
        let fin = final_sample_sizes(&spec, BasketMask::from_bools(&[true, true, false])).unwrap();
        assert_eq!(fin.len(), 2);
        assert!((fin[0].1 - 75.0).abs() < 1e-12 && (fin[1].1 - 75.0).abs() < 1e-12);

        let mut spec = table2_design();
        spec.proportions = vec![0.2, 0.3, 0.5];
        let fin = final_sample_sizes(&spec, BasketMask::full(3)).unwrap();
        assert_eq!(fin, vec![(0, 30.0), (1, 45.0), (2, 75.0)]);

        assert_eq!(
            final_sample_sizes(&spec, BasketMask::empty(3)),
            Err(Error::EmptyMask)
        );
    }
}
