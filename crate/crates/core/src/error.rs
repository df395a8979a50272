use alloc::vec::Vec;
use core::fmt;

use crate::design::Violation;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidDesign(Violations),
    #[error("operation requires a non-empty basket mask")]
    EmptyMask,
    #[error("{k} baskets exceeds the supported maximum of {max}")]
    TooManyBaskets { k: usize, max: usize },
    #[error("mask has {found} baskets but the design has {expected}")]
    MaskLength { expected: usize, found: usize },
    #[error("basket index {index} out of range for {k} baskets")]
    BasketIndex { index: usize, k: usize },
    #[error("probability {0} is outside the open interval (0, 1)")]
    OutOfDomain(f64),
    #[error("pooled statistic has zero conditional variance")]
    DegenerateVariance,
    #[error("joint law is invalid: sum of squared correlations is {0}")]
    InvalidLaw(f64),
    #[error("tolerance {0} must lie in (0, 1e-3]")]
    InvalidTolerance(f64),
    #[error("alpha {alpha} cannot be reached: the largest attainable type-1 error is {attainable}")]
    NoRoot { alpha: f64, attainable: f64 },
    #[error("target power {target} is not reached by N = {n_max} (power there is {power})")]
    Unattainable { target: f64, n_max: f64, power: f64 },
    #[error("target power {0} must lie in (alpha, 1)")]
    InvalidTarget(f64),
    #[error("accrual rates: {0}")]
    InvalidAccrual(&'static str),
    #[error("replicate count {0} is below the minimum of {1}")]
    TooFewReplicates(u64, u64),
    #[error("allocation grid: {0}")]
    InvalidGrid(&'static str),
    #[error("basket {basket} has only {size} interim participants; participant-level simulation needs at least 2")]
    ParticipantSizes { basket: usize, size: u64 },
}

/// The list of design invariants a [`crate::DesignSpec`] failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Violations(pub Vec<Violation>);

impl Violations {
    pub fn iter(&self) -> core::slice::Iter<'_, Violation> {
        self.0.iter()
    }
}

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
