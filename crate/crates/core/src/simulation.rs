//! Seeded Monte Carlo simulation of whole trials.
//!
//! Replicate `r` of a run with master seed `s` draws from
//! [`stream_rng(s, r)`](crate::sequence::stream_rng), so every replicate is
//! reproducible on its own and a run's result does not depend on how
//! replicates are scheduled. Replicates are accumulated in fixed chunks of
//! [`CHUNK`] that are merged in index order, which keeps serial and parallel
//! runs bit-identical.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::design::{reallocation_weights, BasketMask, DesignSpec};
use crate::error::{Error, Result};
use crate::normal;
use crate::operations::{mask_duration, mask_participants, AccrualPlan};
use crate::sequence::{standard_normal, stream_rng};

/// Replicates per accumulation chunk.
pub const CHUNK: u64 = 4096;
/// Smallest replicate count accepted by [`Simulator::estimate`].
pub const MIN_REPLICATES: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimulationMode {
    /// Draws the test statistics from their joint normal law.
    #[default]
    Statistic,
    /// Draws arm sums of unit-variance normal endpoints with integer sample
    /// sizes (rounded half up) and forms two-sample z statistics.
    Participant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub interim_draws: Vec<f64>,
    pub realized_mask: BasketMask,
    /// `None` when every basket is pruned.
    pub pooled_statistic: Option<f64>,
    pub rejected: bool,
    /// `None` when no accrual plan was supplied.
    pub duration: Option<f64>,
    pub participants: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ArmSizes {
    treated: u64,
    control: u64,
}

impl ArmSizes {
    fn split(n: u64) -> Self {
        let treated = n.div_ceil(2);
        ArmSizes { treated, control: n - treated }
    }

    fn total(self) -> u64 {
        self.treated + self.control
    }

    fn scale(self) -> f64 {
        libm::sqrt(1.0 / self.treated as f64 + 1.0 / self.control as f64)
    }
}

fn round_half_up(x: f64) -> u64 {
    libm::floor(x + 0.5) as u64
}

/// A prepared simulation of one design at a fixed final threshold.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: DesignSpec,
    g: BasketMask,
    z_t: f64,
    z_star: f64,
    mode: SimulationMode,
    accrual: Option<AccrualPlan>,
    interim_means: Vec<f64>,
    interim_arms: Vec<ArmSizes>,
}

impl Simulator {
    pub fn new(
        spec: &DesignSpec,
        g: BasketMask,
        alpha_star: f64,
        mode: SimulationMode,
        accrual: Option<AccrualPlan>,
    ) -> Result<Self> {
        spec.check_mask(g)?;
        let z_t = normal::upper_critical(spec.alpha_interim)?;
        let z_star = normal::upper_critical(alpha_star)?;
        if let Some(a) = &accrual {
            // Surface a rate/basket mismatch now rather than per replicate.
            mask_duration(spec, a, BasketMask::full(spec.k))?;
        }
        let interim_means = (0..spec.k)
            .map(|i| effect(spec, g, i) * libm::sqrt(spec.n_total * spec.proportions[i] * spec.info_time / 4.0))
            .collect();
        let interim_arms: Vec<ArmSizes> = (0..spec.k)
            .map(|i| ArmSizes::split(round_half_up(spec.n_total * spec.proportions[i] * spec.info_time)))
            .collect();
        if mode == SimulationMode::Participant {
            if let Some((basket, a)) = interim_arms.iter().enumerate().find(|(_, a)| a.control == 0) {
                return Err(Error::ParticipantSizes { basket, size: a.total() });
            }
        }
        Ok(Simulator { spec: spec.clone(), g, z_t, z_star, mode, accrual, interim_means, interim_arms })
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    /// Replicate `index` of a run seeded with `seed`.
    pub fn replicate(&self, seed: u64, index: u64) -> ReplicateOutcome {
        let mut rng = stream_rng(seed, index);
        match self.mode {
            SimulationMode::Statistic => self.statistic_replicate(&mut rng),
            SimulationMode::Participant => self.participant_replicate(&mut rng),
        }
    }

    fn statistic_replicate(&self, rng: &mut ChaCha8Rng) -> ReplicateOutcome {
        let y1: Vec<f64> = self.interim_means.iter().map(|mu| mu + standard_normal(rng)).collect();
        let m = self.survivors(&y1);
        let pooled = if m.is_empty() {
            None
        } else {
            let y2 = self.stage_two(m, &y1, rng);
            Some(self.pooled(m, y2.iter().copied()))
        };
        self.outcome(y1, m, pooled, None)
    }

    /// Final statistics `(basket, Y_i2)` of survivors given their interims.
    fn stage_two(&self, m: BasketMask, y1: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let spec = &self.spec;
        let r = libm::sqrt(spec.info_time * m.dot(&spec.proportions));
        let resid = libm::sqrt((1.0 - r * r).max(0.0));
        let w = reallocation_weights(&spec.proportions, m).expect("non-empty mask");
        w.iter()
            .map(|(i, wi)| {
                let mu2 = effect(spec, self.g, i) * libm::sqrt(spec.n_total * wi / 4.0);
                let mu1 = self.interim_means[i];
                r * y1[i] + resid * standard_normal(rng) + (mu2 - r * mu1)
            })
            .collect()
    }

    fn participant_replicate(&self, rng: &mut ChaCha8Rng) -> ReplicateOutcome {
        let spec = &self.spec;
        let k = spec.k;
        let mut sums = Vec::with_capacity(k);
        let mut y1 = Vec::with_capacity(k);
        for i in 0..k {
            let arms = self.interim_arms[i];
            let delta = effect(spec, self.g, i);
            let st = arm_sum(arms.treated, delta, rng);
            let sc = arm_sum(arms.control, 0.0, rng);
            y1.push(z_statistic(st, sc, arms));
            sums.push((st, sc));
        }
        let m = self.survivors(&y1);
        let mut participants: u64 = m.complement().indices().map(|i| self.interim_arms[i].total()).sum();
        let pooled = if m.is_empty() {
            None
        } else {
            let w = reallocation_weights(&spec.proportions, m).expect("non-empty mask");
            let mut y2 = Vec::with_capacity(w.indices().len());
            for (i, wi) in w.iter() {
                let interim = self.interim_arms[i];
                let fin = ArmSizes::split(round_half_up(spec.n_total * wi).max(interim.total()));
                let delta = effect(spec, self.g, i);
                let st = sums[i].0 + arm_sum(fin.treated - interim.treated, delta, rng);
                let sc = sums[i].1 + arm_sum(fin.control - interim.control, 0.0, rng);
                y2.push(z_statistic(st, sc, fin));
                participants += fin.total();
            }
            Some(self.pooled(m, y2.into_iter()))
        };
        self.outcome(y1, m, pooled, Some(participants as f64))
    }

    fn survivors(&self, y1: &[f64]) -> BasketMask {
        let mut bits = 0u32;
        for (i, y) in y1.iter().enumerate() {
            if *y >= self.z_t {
                bits |= 1 << i;
            }
        }
        BasketMask::from_bits(bits, self.spec.k)
    }

    fn pooled(&self, m: BasketMask, y2: impl Iterator<Item = f64>) -> f64 {
        let w = reallocation_weights(&self.spec.proportions, m).expect("non-empty mask");
        let num: f64 = w.weights().iter().zip(y2).map(|(wi, y)| wi * y).sum();
        num / libm::sqrt(w.sum_of_squares())
    }

    fn outcome(
        &self,
        interim_draws: Vec<f64>,
        m: BasketMask,
        pooled_statistic: Option<f64>,
        participants: Option<f64>,
    ) -> ReplicateOutcome {
        let participants = participants
            .unwrap_or_else(|| mask_participants(&self.spec, m).expect("mask length checked"));
        let duration = self
            .accrual
            .as_ref()
            .map(|a| mask_duration(&self.spec, a, m).expect("accrual checked"));
        ReplicateOutcome {
            interim_draws,
            realized_mask: m,
            rejected: pooled_statistic.is_some_and(|v| v >= self.z_star),
            pooled_statistic,
            duration,
            participants,
        }
    }

    /// Interim and final statistics of every basket with pruning switched
    /// off (all baskets forced to survive), statistic mode only.
    pub fn unpruned_stages(&self, seed: u64, index: u64) -> Vec<(f64, f64)> {
        let mut rng = stream_rng(seed, index);
        let y1: Vec<f64> =
            self.interim_means.iter().map(|mu| mu + standard_normal(&mut rng)).collect();
        let y2 = self.stage_two(BasketMask::full(self.spec.k), &y1, &mut rng);
        y1.into_iter().zip(y2).collect()
    }

    /// Accumulates replicates `start..end`.
    pub fn run_range(&self, seed: u64, start: u64, end: u64) -> Accumulator {
        let mut acc = Accumulator::default();
        for r in start..end {
            acc.push(&self.replicate(seed, r));
        }
        acc
    }

    /// Number of [`CHUNK`]-sized pieces for `replicates`.
    pub fn chunk_count(replicates: u64) -> u64 {
        replicates.div_ceil(CHUNK)
    }

    /// Accumulator for chunk `c` of a run of `replicates`.
    pub fn run_chunk(&self, seed: u64, replicates: u64, c: u64) -> Accumulator {
        let start = c * CHUNK;
        self.run_range(seed, start, (start + CHUNK).min(replicates))
    }

    /// Serial run; chunks are merged in index order.
    pub fn estimate(&self, replicates: u64, seed: u64) -> Result<SimulationSummary> {
        check_replicates(replicates)?;
        let mut total = Accumulator::default();
        for c in 0..Self::chunk_count(replicates) {
            total.merge(&self.run_chunk(seed, replicates, c));
        }
        Ok(total.summary(seed))
    }
}

fn effect(spec: &DesignSpec, g: BasketMask, i: usize) -> f64 {
    if g.contains(i) {
        spec.effect_sizes[i]
    } else {
        0.0
    }
}

/// Sum of `n` unit-variance endpoints with mean `mean`.
fn arm_sum(n: u64, mean: f64, rng: &mut ChaCha8Rng) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    nf * mean + libm::sqrt(nf) * standard_normal(rng)
}

fn z_statistic(sum_treated: f64, sum_control: f64, arms: ArmSizes) -> f64 {
    (sum_treated / arms.treated as f64 - sum_control / arms.control as f64) / arms.scale()
}

pub fn check_replicates(replicates: u64) -> Result<()> {
    if replicates < MIN_REPLICATES {
        Err(Error::TooFewReplicates(replicates, MIN_REPLICATES))
    } else {
        Ok(())
    }
}

/// Running sums over replicates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    rejections: u64,
    masks: BTreeMap<BasketMask, u64>,
    duration: Option<(f64, f64)>,
    participants: (f64, f64),
}

impl Accumulator {
    pub fn push(&mut self, o: &ReplicateOutcome) {
        self.count += 1;
        self.rejections += o.rejected as u64;
        *self.masks.entry(o.realized_mask).or_insert(0) += 1;
        if let Some(d) = o.duration {
            let s = self.duration.get_or_insert((0.0, 0.0));
            s.0 += d;
            s.1 += d * d;
        }
        self.participants.0 += o.participants;
        self.participants.1 += o.participants * o.participants;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.rejections += other.rejections;
        for (m, c) in &other.masks {
            *self.masks.entry(*m).or_insert(0) += c;
        }
        if let Some((a, b)) = other.duration {
            let s = self.duration.get_or_insert((0.0, 0.0));
            s.0 += a;
            s.1 += b;
        }
        self.participants.0 += other.participants.0;
        self.participants.1 += other.participants.1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn summary(&self, seed: u64) -> SimulationSummary {
        let n = self.count as f64;
        let rate = self.rejections as f64 / n;
        let mean_se = |(sum, sq): (f64, f64)| {
            let mean = sum / n;
            let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
            Estimate { mean, se: libm::sqrt(var / n) }
        };
        SimulationSummary {
            replicate_count: self.count,
            seed,
            rejections: self.rejections,
            rejection_rate: Estimate { mean: rate, se: libm::sqrt(rate * (1.0 - rate) / n) },
            mask_frequencies: self.masks.iter().map(|(m, c)| (*m, *c)).collect(),
            duration: self.duration.map(mean_se),
            participants: mean_se(self.participants),
        }
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        libm::fabs(self.mean - value) <= k * self.se
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    pub replicate_count: u64,
    pub seed: u64,
    pub rejections: u64,
    pub rejection_rate: Estimate,
    /// Observed masks in ascending bit order with their counts.
    pub mask_frequencies: Vec<(BasketMask, u64)>,
    pub duration: Option<Estimate>,
    pub participants: Estimate,
}

impl SimulationSummary {
    pub fn mask_count(&self, m: BasketMask) -> u64 {
        self.mask_frequencies.iter().find(|(x, _)| *x == m).map_or(0, |(_, c)| *c)
    }

    /// Observed frequency of `m` with its binomial standard error.
    pub fn mask_rate(&self, m: BasketMask) -> Estimate {
        let n = self.replicate_count as f64;
        let p = self.mask_count(m) as f64 / n;
        Estimate { mean: p, se: libm::sqrt(p * (1.0 - p) / n) }
    }
}

/// One statistic-mode trial seeded by `seed`.
pub fn simulate_trial(
    spec: &DesignSpec,
    g: BasketMask,
    alpha_star: f64,
    seed: u64,
) -> Result<ReplicateOutcome> {
    Ok(Simulator::new(spec, g, alpha_star, SimulationMode::Statistic, None)?.replicate(seed, 0))
}

/// Statistic-mode operating characteristics over `replicates` trials.
pub fn estimate_operating_characteristics(
    spec: &DesignSpec,
    g: BasketMask,
    alpha_star: f64,
    replicates: u64,
    seed: u64,
    accrual: Option<AccrualPlan>,
) -> Result<SimulationSummary> {
    Simulator::new(spec, g, alpha_star, SimulationMode::Statistic, accrual)?.estimate(replicates, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec3() -> DesignSpec {
        DesignSpec::equal_allocation(3, 150.0, 0.5, 0.5, 0.025, 0.3)
    }

    #[test]
    fn replay_is_deterministic() {
        let s = spec3();
        let a = simulate_trial(&s, s.active_mask(), 0.01, 42).unwrap();
        let b = simulate_trial(&s, s.active_mask(), 0.01, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejection_needs_survivors() {
        let s = spec3();
        let sim = Simulator::new(&s, s.null_mask(), 0.01, SimulationMode::Statistic, None).unwrap();
        for r in 0..2000 {
            let o = sim.replicate(7, r);
            if o.realized_mask.is_empty() {
                assert!(!o.rejected && o.pooled_statistic.is_none());
                assert_eq!(o.participants, 75.0);
            }
        }
    }

    #[test]
    fn chunked_equals_flat() {
        let s = spec3();
        let sim = Simulator::new(&s, s.active_mask(), 0.01, SimulationMode::Statistic, None).unwrap();
        let summary = sim.estimate(5000, 3).unwrap();
        let mut flat = Accumulator::default();
        flat.merge(&sim.run_range(3, 0, CHUNK));
        flat.merge(&sim.run_range(3, CHUNK, 5000));
        assert_eq!(summary, flat.summary(3));
        let total: u64 = summary.mask_frequencies.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 5000);
    }

    #[test]
    fn too_few_replicates() {
        let s = spec3();
        assert_eq!(
            estimate_operating_characteristics(&s, s.active_mask(), 0.01, 999, 1, None),
            Err(Error::TooFewReplicates(999, 1000))
        );
    }

    #[test]
    fn participant_mode_counts_people() {
        let s = spec3();
        let sim = Simulator::new(&s, s.active_mask(), 0.01, SimulationMode::Participant, None).unwrap();
        for r in 0..200 {
            let o = sim.replicate(11, r);
            let expect = mask_participants(&s, o.realized_mask).unwrap();
            assert!((o.participants - expect).abs() <= 3.0, "{} vs {expect}", o.participants);
        }
    }

    #[test]
    fn participant_mode_rejects_tiny_baskets() {
        let mut s = spec3();
        s.n_total = 6.0;
        assert!(matches!(
            Simulator::new(&s, s.active_mask(), 0.01, SimulationMode::Participant, None),
            Err(Error::ParticipantSizes { .. })
        ));
    }
}
