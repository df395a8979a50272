//! Low-discrepancy points and seeded random streams.
//!
//! Quasi–Monte Carlo uses the additive recurrence `x_n = frac(s + n·α)` with
//! the generalized golden-ratio generator `α_j = φ_d^{-j}`, where `φ_d` is
//! the positive root of `x^{d+1} = x + 1`. Each randomization draws a fresh
//! uniform shift `s` from a seeded ChaCha stream, so independent shifts give
//! an unbiased error estimate.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic random stream for `(seed, stream)`.
///
/// Streams with different indices are independent ChaCha8 streams keyed by
/// the same seed, so replicate `i` of a simulation always sees the same draws
/// regardless of how replicates are scheduled.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on the open interval `(0, 1)` with 53 bits of resolution.
#[inline]
pub fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw by inversion.
#[inline]
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    -crate::normal::isf_unchecked(open_unit(rng))
}

/// Generator vector of the `dim`-dimensional recurrence.
pub fn recurrence_generator(dim: usize) -> Vec<f64> {
    let mut phi = 2.0;
    // Fixed-point iteration converges for every d ≥ 1.
    for _ in 0..64 {
        phi = libm::pow(1.0 + phi, 1.0 / (dim as f64 + 1.0));
    }
    (1..=dim).map(|j| libm::pow(1.0 / phi, j as f64) % 1.0).collect()
}

/// A randomly shifted copy of the recurrence sequence.
#[derive(Debug, Clone)]
pub struct ShiftedRecurrence {
    generator: Vec<f64>,
    shift: Vec<f64>,
}

impl ShiftedRecurrence {
    pub fn new(dim: usize, rng: &mut impl RngCore) -> Self {
        let generator = recurrence_generator(dim);
        let shift = (0..dim).map(|_| open_unit(rng)).collect();
        ShiftedRecurrence { generator, shift }
    }

    pub fn dim(&self) -> usize {
        self.generator.len()
    }

    /// Writes point `index` into `out`; coordinates lie strictly inside (0, 1)
    /// up to rounding, and exact zeros are nudged away.
    pub fn point(&self, index: u64, out: &mut [f64]) {
        let n = index as f64;
        for ((o, g), s) in out.iter_mut().zip(&self.generator).zip(&self.shift) {
            let mut u = (s + n * g) % 1.0;
            if u <= 0.0 {
                u = f64::EPSILON;
            }
            *o = u;
        }
    }
}
