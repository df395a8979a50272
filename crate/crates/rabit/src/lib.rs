//! Command line tool and HTTP service for two-stage randomized basket trial
//! design, built on [`rabit_core`].
//!
//! * [`config`]: JSON run configuration and flag overrides.
//! * [`engine`]: parallel evaluation with a shared `α*` cache.
//! * [`commands`]: operations shared by the CLI and the service.
//! * [`reproduce`]: regeneration of the published tables and figures.
//! * [`service`]: the axum router.

pub use rabit_core as core;

pub mod cli;
pub mod commands;
pub mod config;
pub mod engine;
pub mod error;
pub mod output;
pub mod report;
pub mod reproduce;
pub mod service;

pub use engine::Engine;
pub use error::AppError;
