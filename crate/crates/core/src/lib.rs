//! Design engine for two-stage randomized basket trials.
//!
//! A trial runs `K` baskets with 1:1 randomization inside each basket. At
//! information time `t` every basket is tested on its own at the one-sided
//! level `α_t`; baskets that fail are pruned and their remaining sample is
//! reallocated to the survivors in proportion to their original sizes. The
//! survivors are then pooled with a weighted Stouffer statistic tested at a
//! final level `α*`, chosen so that the whole design spends exactly `α`.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerics:
//!
//! * [`design`]: domain types, validation, reallocation weights, masks.
//! * [`normal`] and [`tail`]: the joint law of the interim and pooled
//!   statistics and its upper-tail probability.
//! * [`inference`]: type-1 accounting, the `α*` root solve, power and
//!   sample size.
//! * [`operations`]: trial duration and enrolment forecasts.
//! * [`simulation`]: a seeded Monte Carlo simulator used as an independent
//!   check of everything above.

#![no_std]

extern crate alloc;

pub mod allocation;
pub mod design;
mod error;
pub mod inference;
pub mod normal;
pub mod operations;
pub mod quadrature;
pub mod root;
pub mod sequence;
pub mod simulation;
pub mod tail;

pub use design::{BasketMask, DesignSpec, Violation, WeightVector};
pub use error::{Error, Result, Violations};
pub use inference::{InferenceResult, MaskBreakdown};
pub use operations::{AccrualPlan, OperationalForecast};
pub use simulation::{ReplicateOutcome, SimulationSummary};
pub use tail::{Backend, JointLaw, TailQuery, TailSettings};
