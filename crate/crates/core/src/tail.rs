//! Joint law of the interim statistics and the pooled statistic, and its
//! upper-tail probability.
//!
//! For a survivor set `m` the interim statistics `Y_i1` (`i ∈ id(m)`) are
//! independent unit-variance normals with means `μ_i`, and the pooled
//! statistic `V_m` is unit-variance normal with mean `μ_V` and
//! `corr(Y_i1, V_m) = ρ_i`. Writing `X_i = Y_i1 − μ_i`, conditionally on the
//! interims
//!
//! ```text
//! V_m | X  ~  N(μ_V + Σ ρ_i X_i, 1 − Σ ρ_i²)
//! ```
//!
//! so `P(∩ Y_i1 ≥ z_t, V_m ≥ z*)` is the expectation of a normal upper tail
//! in `S = Σ ρ_i X_i` over independent lower-truncated normals `X_i ≥ z_t − μ_i`.
//! Both backends build a discrete measure for `S` on the truncation region
//! once (a [`TailKernel`]), after which any pooled threshold costs a single
//! pass over the atoms. That is what makes the `α*` root solve cheap.
//!
//! The quadrature backend convolves one coordinate at a time and compresses
//! the running measure onto a uniform grid after each step, so its cost grows
//! linearly with the number of survivors. It is the default at every
//! dimension. The quasi–Monte Carlo backend is kept as an independent check.

use alloc::vec::Vec;

use crate::design::{reallocation_weights, BasketMask, DesignSpec};
use crate::error::{Error, Result};
use crate::normal;
use crate::quadrature::GaussLegendre;
use crate::sequence::{stream_rng, ShiftedRecurrence};

/// Integration ranges are cut at this many standard deviations.
pub const TRUNCATION: f64 = 8.5;
/// Default absolute tolerance for tail probabilities.
pub const DEFAULT_TOLERANCE: f64 = 1e-7;
/// `1 − Σρ²` at or below this is treated as an exactly degenerate pooled statistic.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;
/// Default seed for quasi–Monte Carlo shifts.
pub const DEFAULT_SEED: u64 = 0x5EED_BA5E;

const CORE_RANGE: f64 = 6.0;
const MAX_GRID: usize = 1 << 18;
const QMC_SHIFTS: usize = 8;

/// Means and correlation structure of `(Y_i1 for i ∈ id(m), V_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw {
    survivors: Vec<usize>,
    interim_means: Vec<f64>,
    pooled_mean: f64,
    correlations: Vec<f64>,
}

impl JointLaw {
    /// Builds a law from raw parts; `Σρ²` may not exceed one.
    pub fn new(
        survivors: Vec<usize>,
        interim_means: Vec<f64>,
        pooled_mean: f64,
        correlations: Vec<f64>,
    ) -> Result<Self> {
        if survivors.is_empty() {
            return Err(Error::EmptyMask);
        }
        let n = survivors.len();
        let sum_sq: f64 = correlations.iter().map(|r| r * r).sum();
        if interim_means.len() != n
            || correlations.len() != n
            || !pooled_mean.is_finite()
            || interim_means.iter().any(|m| !m.is_finite())
            || correlations.iter().any(|r| !(r.is_finite() && *r >= 0.0))
            || sum_sq > 1.0 + DEGENERATE_VARIANCE
        {
            return Err(Error::InvalidLaw(sum_sq));
        }
        Ok(JointLaw { survivors, interim_means, pooled_mean, correlations })
    }

    pub fn survivors(&self) -> &[usize] {
        &self.survivors
    }

    pub fn interim_means(&self) -> &[f64] {
        &self.interim_means
    }

    pub fn pooled_mean(&self) -> f64 {
        self.pooled_mean
    }

    pub fn correlations(&self) -> &[f64] {
        &self.correlations
    }

    pub fn dim(&self) -> usize {
        self.survivors.len()
    }

    pub fn sum_sq_correlation(&self) -> f64 {
        self.correlations.iter().map(|r| r * r).sum()
    }

    /// Conditional variance of `V_m` given every interim statistic.
    pub fn conditional_variance(&self) -> Result<f64> {
        let v = 1.0 - self.sum_sq_correlation();
        if v <= DEGENERATE_VARIANCE {
            Err(Error::DegenerateVariance)
        } else {
            Ok(v)
        }
    }
}

/// Law of the interim and pooled statistics for survivors `m` when the
/// baskets in `g` are truly active.
///
/// * `μ_i = g_i Δ_i √(N p_i t / 4)`
/// * `μ_V = Σ_{i ∈ id(m⊙g)} w_i Δ_i √(N w_i / 4) / √(Σ_{i ∈ id(m)} w_i²)`
/// * `ρ_i = w_i / √(Σ w²) · √(t (m·p))`
pub fn build_joint_law(spec: &DesignSpec, m: BasketMask, g: BasketMask) -> Result<JointLaw> {
    spec.check_mask(m)?;
    spec.check_mask(g)?;
    let w = reallocation_weights(&spec.proportions, m)?;
    let norm = libm::sqrt(w.sum_of_squares());
    let interim_corr = libm::sqrt(spec.info_time * m.dot(&spec.proportions));
    let n = spec.n_total;
    let mut interim_means = Vec::with_capacity(w.indices().len());
    let mut correlations = Vec::with_capacity(w.indices().len());
    let mut pooled = 0.0;
    for (i, wi) in w.iter() {
        let delta = if g.contains(i) { spec.effect_sizes[i] } else { 0.0 };
        interim_means.push(delta * libm::sqrt(n * spec.proportions[i] * spec.info_time / 4.0));
        pooled += wi * delta * libm::sqrt(n * wi / 4.0);
        correlations.push(wi / norm * interim_corr);
    }
    JointLaw::new(w.indices().to_vec(), interim_means, pooled / norm, correlations)
}

/// `P(Y_i1 ≥ Z_{1−α_t})`; equals `α_t` for an inactive basket.
pub fn interim_pass_probability(spec: &DesignSpec, basket: usize, g: BasketMask) -> Result<f64> {
    if basket >= spec.k {
        return Err(Error::BasketIndex { index: basket, k: spec.k });
    }
    spec.check_mask(g)?;
    if !g.contains(basket) {
        return Ok(spec.alpha_interim);
    }
    let z_t = normal::upper_critical(spec.alpha_interim)?;
    let mean = spec.effect_sizes[basket]
        * libm::sqrt(spec.n_total * spec.proportions[basket] * spec.info_time / 4.0);
    Ok(normal::cdf(mean - z_t))
}

/// Integration strategy for the joint tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Currently always quadrature.
    #[default]
    Auto,
    Quadrature,
    QuasiMonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSettings {
    pub tolerance: f64,
    pub backend: Backend,
    pub seed: u64,
}

impl Default for TailSettings {
    fn default() -> Self {
        TailSettings { tolerance: DEFAULT_TOLERANCE, backend: Backend::Auto, seed: DEFAULT_SEED }
    }
}

impl TailSettings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        TailSettings { tolerance, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tolerance > 0.0 && self.tolerance <= 1e-3 {
            Ok(())
        } else {
            Err(Error::InvalidTolerance(self.tolerance))
        }
    }
}

/// A single joint upper-tail evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TailQuery<'a> {
    pub law: &'a JointLaw,
    /// `Z_{1−α_t}`.
    pub interim_threshold: f64,
    /// `Z_{1−α*}`.
    pub pooled_threshold: f64,
    pub tolerance: f64,
}

impl<'a> TailQuery<'a> {
    pub fn new(law: &'a JointLaw, interim_threshold: f64, pooled_threshold: f64) -> Self {
        TailQuery { law, interim_threshold, pooled_threshold, tolerance: DEFAULT_TOLERANCE }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// `P(∩_{i ∈ id(m)} Y_i1 ≥ z_t, V_m ≥ z*)` with the default backend and seed.
pub fn joint_upper_tail(query: &TailQuery<'_>) -> Result<f64> {
    joint_upper_tail_with(query, Backend::Auto, DEFAULT_SEED)
}

pub fn joint_upper_tail_with(query: &TailQuery<'_>, backend: Backend, seed: u64) -> Result<f64> {
    if query.interim_threshold.is_nan() || query.pooled_threshold.is_nan() {
        return Err(Error::OutOfDomain(f64::NAN));
    }
    let settings = TailSettings { tolerance: query.tolerance, backend, seed };
    settings.validate()?;
    let plan = Plan::new(query.law, query.interim_threshold);
    if let Some(v) = plan.trivial(query.pooled_threshold) {
        return Ok(v);
    }
    if plan.uses_quadrature(backend) {
        let kernel = TailKernel::from_plan(plan, &settings);
        return Ok(kernel.eval(query.pooled_threshold));
    }
    Ok(plan.adaptive_qmc(query.pooled_threshold, &settings).0)
}

/// Quasi–Monte Carlo estimate with its standard error across random shifts.
pub fn joint_upper_tail_qmc(query: &TailQuery<'_>, seed: u64) -> Result<(f64, f64)> {
    let settings = TailSettings { tolerance: query.tolerance, backend: Backend::QuasiMonteCarlo, seed };
    settings.validate()?;
    let plan = Plan::new(query.law, query.interim_threshold);
    if let Some(v) = plan.trivial(query.pooled_threshold) {
        return Ok((v, 0.0));
    }
    Ok(plan.adaptive_qmc(query.pooled_threshold, &settings))
}

/// A joint tail prepared for one law and interim threshold, evaluable at
/// any pooled threshold.
///
/// Evaluation is a positive combination of normal upper tails, so it is
/// exactly nonincreasing in the pooled threshold.
#[derive(Debug, Clone)]
pub struct TailKernel {
    plan: Plan,
    atoms: Atoms,
}

impl TailKernel {
    pub fn prepare(law: &JointLaw, interim_threshold: f64, settings: &TailSettings) -> Result<Self> {
        settings.validate()?;
        if interim_threshold.is_nan() {
            return Err(Error::OutOfDomain(interim_threshold));
        }
        Ok(Self::from_plan(Plan::new(law, interim_threshold), settings))
    }

    fn from_plan(plan: Plan, settings: &TailSettings) -> Self {
        let atoms = if plan.empty_region {
            Atoms::default()
        } else if plan.uses_quadrature(settings.backend) {
            plan.tensor_atoms(settings.tolerance)
        } else {
            let per_shift = qmc_points_for(settings.tolerance);
            let atoms = plan.qmc_atoms(per_shift, settings.seed);
            atoms.compress(plan.grid_step(settings.tolerance))
        };
        TailKernel { plan, atoms }
    }

    /// `P(∩ Y_i1 ≥ z_t)`, the probability that every survivor passes.
    pub fn interim_mass(&self) -> f64 {
        self.plan.exact_mass
    }

    /// Number of atoms in the prepared measure.
    pub fn atom_count(&self) -> usize {
        self.atoms.s.len()
    }

    pub fn eval(&self, pooled_threshold: f64) -> f64 {
        if let Some(v) = self.plan.trivial(pooled_threshold) {
            return v;
        }
        self.plan.const_mass * self.plan.integrate(&self.atoms, pooled_threshold)
    }
}

#[derive(Debug, Clone, Copy)]
struct Coordinate {
    lower: f64,
    rho: f64,
}

#[derive(Debug, Clone)]
struct Plan {
    /// Coordinates integrated numerically.
    coords: Vec<Coordinate>,
    /// Coordinate integrated in closed form when the pooled statistic is degenerate.
    analytic: Option<Coordinate>,
    sd: f64,
    pooled_mean: f64,
    /// Mass of coordinates with zero correlation, factored out exactly.
    const_mass: f64,
    exact_mass: f64,
    empty_region: bool,
}

impl Plan {
    fn new(law: &JointLaw, interim_threshold: f64) -> Self {
        let mut coords = Vec::with_capacity(law.dim());
        let mut const_mass = 1.0;
        let mut exact_mass = 1.0;
        let mut empty_region = false;
        for (&mu, &rho) in law.interim_means.iter().zip(&law.correlations) {
            let lower = interim_threshold - mu;
            let mass = normal::sf(lower);
            exact_mass *= mass;
            if lower >= TRUNCATION {
                empty_region = true;
            }
            if rho == 0.0 {
                const_mass *= mass;
            } else {
                coords.push(Coordinate { lower, rho });
            }
        }
        let variance = 1.0 - law.sum_sq_correlation();
        let (sd, analytic) = if variance <= DEGENERATE_VARIANCE {
            // V_m is a deterministic function of the interims: integrate the
            // most correlated coordinate in closed form.
            let (pos, _) = coords
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |best, (i, c)| if c.rho > best.1 { (i, c.rho) } else { best });
            (0.0, Some(coords.remove(pos)))
        } else {
            (libm::sqrt(variance), None)
        };
        Plan {
            coords,
            analytic,
            sd,
            pooled_mean: law.pooled_mean,
            const_mass,
            exact_mass,
            empty_region,
        }
    }

    fn uses_quadrature(&self, backend: Backend) -> bool {
        match backend {
            Backend::Quadrature => true,
            Backend::QuasiMonteCarlo => false,
            Backend::Auto => true,
        }
    }

    fn trivial(&self, pooled_threshold: f64) -> Option<f64> {
        if self.exact_mass == 0.0 || pooled_threshold == f64::INFINITY {
            Some(0.0)
        } else if pooled_threshold == f64::NEG_INFINITY {
            Some(self.exact_mass)
        } else if self.empty_region {
            // Survival region lies beyond the truncation point.
            Some(0.0)
        } else {
            None
        }
    }

    /// Conditional pooled tail given `S = s`.
    #[inline]
    fn conditional_tail(&self, c: f64, s: f64) -> f64 {
        match self.analytic {
            None => normal::sf((c - s) / self.sd),
            Some(last) => {
                let x = (c - s) / last.rho;
                normal::sf(if x > last.lower { x } else { last.lower })
            }
        }
    }

    fn integrate(&self, atoms: &Atoms, pooled_threshold: f64) -> f64 {
        let c = pooled_threshold - self.pooled_mean;
        atoms
            .s
            .iter()
            .zip(&atoms.w)
            .map(|(&s, &w)| w * self.conditional_tail(c, s))
            .sum()
    }

    /// Spacing of the compression grid.
    ///
    /// Splitting an atom linearly between two grid points keeps its mass and
    /// mean and adds at most `h²/4` of variance, so across `d` stages the
    /// error is bounded by `d h² max|g''| / 8` with `|g''| ≤ 0.242 / sd²`.
    /// In the degenerate case the conditional tail has a kink instead and
    /// the error is of order `h²` per stage.
    fn grid_step(&self, tolerance: f64) -> f64 {
        let stages = self.coords.len().max(1) as f64;
        match self.analytic {
            None => self.sd * libm::sqrt(tolerance / (2.0 * stages * 0.0303)),
            Some(_) => 3.0 * libm::sqrt(tolerance / stages),
        }
    }

    fn tensor_atoms(&self, tolerance: f64) -> Atoms {
        let nodes_per_panel = if tolerance > 1e-5 {
            4
        } else if tolerance > 1e-9 {
            6
        } else {
            8
        };
        let rule = GaussLegendre::new(nodes_per_panel);
        let step = self.grid_step(tolerance);
        let mut atoms = Atoms { s: alloc::vec![0.0], w: alloc::vec![1.0] };
        for coord in &self.coords {
            let width = match self.analytic {
                None => (1.5 * self.sd / coord.rho).min(1.0),
                Some(_) => 0.05,
            };
            let (xs, ws) = coordinate_nodes(coord.lower, width, &rule);
            let mut next = Atoms::with_capacity(atoms.s.len() * xs.len());
            for (&s, &w) in atoms.s.iter().zip(&atoms.w) {
                for (&x, &wx) in xs.iter().zip(&ws) {
                    next.s.push(s + coord.rho * x);
                    next.w.push(w * wx);
                }
            }
            atoms = next.compress(step);
        }
        atoms
    }

    fn qmc_atoms(&self, per_shift: usize, seed: u64) -> Atoms {
        let dim = self.coords.len();
        let total = per_shift * QMC_SHIFTS;
        let mut atoms = Atoms::with_capacity(total);
        let masses: Vec<f64> = self.coords.iter().map(|c| normal::sf(c.lower)).collect();
        let weight = masses.iter().product::<f64>() / total as f64;
        let mut rng = stream_rng(seed, dim as u64);
        let mut u = alloc::vec![0.0; dim];
        for _ in 0..QMC_SHIFTS {
            let seq = ShiftedRecurrence::new(dim, &mut rng);
            for idx in 0..per_shift {
                seq.point(idx as u64, &mut u);
                let s: f64 = self
                    .coords
                    .iter()
                    .zip(&masses)
                    .zip(&u)
                    .map(|((c, &m), &ui)| c.rho * normal::isf_unchecked(tent(ui) * m))
                    .sum();
                atoms.s.push(s);
                atoms.w.push(weight);
            }
        }
        atoms
    }

    /// Doubles the point count until three standard errors fall below the
    /// tolerance (or a hard cap is reached).
    fn adaptive_qmc(&self, pooled_threshold: f64, settings: &TailSettings) -> (f64, f64) {
        const MAX_PER_SHIFT: usize = 1 << 19;
        let mut per_shift = qmc_points_for(settings.tolerance);
        loop {
            let atoms = self.qmc_atoms(per_shift, settings.seed);
            let c = pooled_threshold - self.pooled_mean;
            let mut shift_means = [0.0; QMC_SHIFTS];
            for (k, chunk) in atoms.s.chunks(per_shift).enumerate() {
                let w = &atoms.w[k * per_shift..(k + 1) * per_shift];
                let sum: f64 =
                    chunk.iter().zip(w).map(|(&s, &wi)| wi * self.conditional_tail(c, s)).sum();
                shift_means[k] = sum * QMC_SHIFTS as f64;
            }
            let r = QMC_SHIFTS as f64;
            let mean = shift_means.iter().sum::<f64>() / r;
            let var = shift_means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
            let se = libm::sqrt(var / r);
            if 3.0 * se <= settings.tolerance || per_shift >= MAX_PER_SHIFT {
                return (self.const_mass * mean, self.const_mass * se);
            }
            per_shift *= 2;
        }
    }
}

/// Periodizing map `u ↦ 1 − |2u − 1|`; keeps the uniform law and makes the
/// integrand continuous across the unit torus, which the recurrence needs.
#[inline]
fn tent(u: f64) -> f64 {
    let v = 1.0 - libm::fabs(2.0 * u - 1.0);
    if v > 0.0 {
        v
    } else {
        f64::MIN_POSITIVE
    }
}

fn qmc_points_for(tolerance: f64) -> usize {
    if tolerance >= 1e-4 {
        1 << 11
    } else if tolerance >= 1e-6 {
        1 << 13
    } else {
        1 << 15
    }
}

/// Composite Gauss–Legendre nodes for `∫_{lower}^{T} φ(x) f(x) dx`, with the
/// weights rescaled so they sum to exactly `P(X ≥ lower)`.
fn coordinate_nodes(lower: f64, width: f64, rule: &GaussLegendre) -> (Vec<f64>, Vec<f64>) {
    let lo = lower.max(-TRUNCATION);
    let mut edges = Vec::new();
    edges.push(lo);
    if lo < -CORE_RANGE {
        edges.push(-CORE_RANGE);
    }
    let core_lo = lo.max(-CORE_RANGE);
    if core_lo < CORE_RANGE {
        let span = CORE_RANGE - core_lo;
        let panels = libm::ceil(span / width).max(1.0) as usize;
        let h = span / panels as f64;
        for j in 1..=panels {
            edges.push(core_lo + h * j as f64);
        }
    }
    if *edges.last().unwrap() < TRUNCATION {
        edges.push(TRUNCATION);
    }
    let mut xs = Vec::with_capacity(edges.len() * rule.len());
    let mut ws = Vec::with_capacity(edges.len() * rule.len());
    for pair in edges.windows(2) {
        for (x, w) in rule.mapped(pair[0], pair[1]) {
            xs.push(x);
            ws.push(w * normal::pdf(x));
        }
    }
    let total: f64 = ws.iter().sum();
    let exact = normal::sf(lower);
    if total > 0.0 {
        let scale = exact / total;
        for w in &mut ws {
            *w *= scale;
        }
    }
    (xs, ws)
}

#[derive(Debug, Clone, Default)]
struct Atoms {
    s: Vec<f64>,
    w: Vec<f64>,
}

impl Atoms {
    fn with_capacity(n: usize) -> Self {
        Atoms { s: Vec::with_capacity(n), w: Vec::with_capacity(n) }
    }

    /// Linear mass splitting onto a uniform grid of spacing `h` (widened if
    /// that would need more than `MAX_GRID` cells); a no-op when the grid
    /// would not be smaller than the atom set.
    fn compress(self, h: f64) -> Atoms {
        if !(h > 0.0) || self.s.len() < 2 {
            return self;
        }
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &s in &self.s {
            min = min.min(s);
            max = max.max(s);
        }
        let mut h = h;
        let mut cells = libm::ceil((max - min) / h) as usize + 2;
        if cells > MAX_GRID {
            h = (max - min) / (MAX_GRID - 2) as f64;
            cells = MAX_GRID;
        }
        if cells >= self.s.len() {
            return self;
        }
        let mut grid = alloc::vec![0.0; cells];
        for (&s, &w) in self.s.iter().zip(&self.w) {
            let pos = (s - min) / h;
            let j = pos as usize;
            let frac = pos - j as f64;
            grid[j] += w * (1.0 - frac);
            grid[j + 1] += w * frac;
        }
        let mut out = Atoms::with_capacity(cells);
        for (j, w) in grid.into_iter().enumerate() {
            if w > 0.0 {
                out.s.push(min + h * j as f64);
                out.w.push(w);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn law(means: Vec<f64>, pooled: f64, rho: Vec<f64>) -> JointLaw {
        let n = rho.len();
        JointLaw::new((0..n).collect(), means, pooled, rho).unwrap()
    }

    #[test]
    fn correlation_examples() {
        let spec = DesignSpec::equal_allocation(2, 150.0, 0.5, 0.5, 0.025, 0.3);
        let l = build_joint_law(&spec, BasketMask::full(2), BasketMask::full(2)).unwrap();
        for r in l.correlations() {
            assert!((r - 0.5).abs() < 1e-15);
        }
        let l = build_joint_law(&spec, BasketMask::from_bools(&[true, false]), BasketMask::full(2))
            .unwrap();
        assert_eq!(l.survivors(), &[0]);
        assert!((l.correlations()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn null_law_has_zero_means() {
        let spec = DesignSpec::equal_allocation(3, 150.0, 0.5, 0.5, 0.025, 0.3);
        let active = build_joint_law(&spec, BasketMask::full(3), BasketMask::full(3)).unwrap();
        let null = build_joint_law(&spec, BasketMask::full(3), BasketMask::empty(3)).unwrap();
        assert!(null.interim_means().iter().all(|&m| m == 0.0));
        assert_eq!(null.pooled_mean(), 0.0);
        assert_eq!(null.correlations(), active.correlations());
        assert!((active.interim_means()[0] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn law_requires_survivors() {
        let spec = DesignSpec::equal_allocation(2, 150.0, 0.5, 0.5, 0.025, 0.3);
        assert_eq!(
            build_joint_law(&spec, BasketMask::empty(2), BasketMask::full(2)),
            Err(Error::EmptyMask)
        );
    }

    #[test]
    fn invalid_law_rejected() {
        assert!(matches!(
            JointLaw::new(vec![0, 1], vec![0.0, 0.0], 0.0, vec![0.8, 0.8]),
            Err(Error::InvalidLaw(_))
        ));
    }

    #[test]
    fn independence_factorizes() {
        let z_t = normal::upper_critical(0.3).unwrap();
        let z_s = normal::upper_critical(0.01).unwrap();
        let l = law(vec![0.0; 3], 0.0, vec![0.0; 3]);
        let p = joint_upper_tail(&TailQuery::new(&l, z_t, z_s)).unwrap();
        assert!((p - 0.3f64.powi(3) * 0.01).abs() < 1e-15);
    }

    #[test]
    fn pooled_threshold_removed() {
        let z_t = normal::upper_critical(0.3).unwrap();
        let l = law(vec![1.25, 0.3], 0.7, vec![0.4, 0.3]);
        let p = joint_upper_tail(&TailQuery::new(&l, z_t, f64::NEG_INFINITY)).unwrap();
        let expect = normal::cdf(1.25 - z_t) * normal::cdf(0.3 - z_t);
        assert!((p - expect).abs() < 1e-15);
    }

    #[test]
    fn infinite_thresholds() {
        let l = law(vec![0.0, 0.0], 0.0, vec![0.5, 0.5]);
        let one = joint_upper_tail(&TailQuery::new(&l, f64::NEG_INFINITY, f64::NEG_INFINITY)).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
        assert_eq!(joint_upper_tail(&TailQuery::new(&l, f64::INFINITY, 0.0)).unwrap(), 0.0);
        assert_eq!(joint_upper_tail(&TailQuery::new(&l, 0.0, f64::INFINITY)).unwrap(), 0.0);
    }

    #[test]
    fn interim_pass_examples() {
        let mut spec = DesignSpec::equal_allocation(3, 150.0, 0.5, 0.5, 0.025, 0.3);
        let g = BasketMask::full(3);
        assert!((interim_pass_probability(&spec, 0, BasketMask::empty(3)).unwrap() - 0.3).abs() < 1e-15);
        // Φ(1.25 − 0.524401) from the scalar normal CDF oracle.
        assert!((interim_pass_probability(&spec, 0, g).unwrap() - 0.765_956).abs() < 5e-6);
        spec.effect_sizes = vec![0.0; 3];
        spec.alpha_interim = 0.5;
        assert!((interim_pass_probability(&spec, 1, g).unwrap() - 0.5).abs() < 1e-15);
        assert!(interim_pass_probability(&spec, 3, g).is_err());
    }

    #[test]
    fn tolerance_is_checked() {
        let l = law(vec![0.0], 0.0, vec![0.5]);
        let q = TailQuery::new(&l, 0.5, 0.5).with_tolerance(0.01);
        assert_eq!(joint_upper_tail(&q), Err(Error::InvalidTolerance(0.01)));
    }

    #[test]
    fn degenerate_single_survivor() {
        // ρ = 1: V equals Y, so the event is Y ≥ max(z_t, z*).
        let l = law(vec![0.0], 0.0, vec![1.0]);
        assert_eq!(l.conditional_variance(), Err(Error::DegenerateVariance));
        let p = joint_upper_tail(&TailQuery::new(&l, 0.5, 1.2)).unwrap();
        assert!((p - normal::sf(1.2)).abs() < 1e-15);
        let p = joint_upper_tail(&TailQuery::new(&l, 1.2, 0.5)).unwrap();
        assert!((p - normal::sf(1.2)).abs() < 1e-15);
    }

    #[test]
    fn compression_keeps_mass_and_mean() {
        let atoms = Atoms {
            s: (0..1000).map(|i| libm::sin(i as f64) * 3.0).collect(),
            w: (0..1000).map(|i| 1.0 + (i % 7) as f64).collect(),
        };
        let mass: f64 = atoms.w.iter().sum();
        let mean: f64 = atoms.s.iter().zip(&atoms.w).map(|(s, w)| s * w).sum::<f64>() / mass;
        let c = atoms.clone().compress(0.05);
        assert!(c.s.len() < 200);
        let mass2: f64 = c.w.iter().sum();
        let mean2: f64 = c.s.iter().zip(&c.w).map(|(s, w)| s * w).sum::<f64>() / mass2;
        assert!((mass - mass2).abs() < 1e-9 * mass);
        assert!((mean - mean2).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_monotone_in_pooled_threshold() {
        let l = law(vec![0.3, 1.0, 0.1], 0.4, vec![0.4, 0.3, 0.35]);
        let k = TailKernel::prepare(&l, 0.52, &TailSettings::default()).unwrap();
        let mut prev = 1.0;
        for i in 0..200 {
            let z = -6.0 + i as f64 * 0.06;
            let v = k.eval(z);
            assert!(v <= prev);
            prev = v;
        }
    }
}
