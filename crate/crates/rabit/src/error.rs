use std::fmt;
use std::path::PathBuf;

use rabit_core::Error as CoreError;
use serde::Serialize;

/// A problem with one input field, addressed by its config path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("invalid input: {}", join(.0))]
    Invalid(Vec<FieldError>),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("sweep has {rows} rows, more than the limit of {max}")]
    SweepTooLarge { rows: u128, max: u128 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const VALIDATION: u8 = 1;
    pub const NUMERIC: u8 = 2;
    pub const MISMATCH: u8 = 3;
}

impl AppError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Invalid(vec![FieldError::new(field, message)])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    /// Whether the error comes from bad input rather than the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            AppError::Core(e) => is_core_validation(e),
            AppError::Invalid(_) | AppError::SweepTooLarge { .. } | AppError::Io { .. } => true,
            AppError::Csv(_) | AppError::Json(_) => false,
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.is_validation() {
            exit::VALIDATION
        } else {
            exit::NUMERIC
        }
    }
}

/// Core errors caused by inputs the caller controls.
pub fn is_core_validation(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::InvalidDesign(_)
            | CoreError::TooManyBaskets { .. }
            | CoreError::MaskLength { .. }
            | CoreError::BasketIndex { .. }
            | CoreError::InvalidTolerance(_)
            | CoreError::InvalidTarget(_)
            | CoreError::InvalidAccrual(_)
            | CoreError::TooFewReplicates(..)
            | CoreError::InvalidGrid(_)
            | CoreError::ParticipantSizes { .. }
    )
}

/// Field-addressed messages for a core validation error, with `prefix`
/// prepended to design fields (e.g. `"design."`).
pub fn core_field_errors(e: &CoreError, prefix: &str) -> Vec<FieldError> {
    match e {
        CoreError::InvalidDesign(v) => v
            .iter()
            .map(|v| FieldError::new(format!("{prefix}{}", v.field()), v.to_string()))
            .collect(),
        CoreError::TooManyBaskets { .. } => vec![FieldError::new(format!("{prefix}k"), e.to_string())],
        CoreError::MaskLength { .. } | CoreError::BasketIndex { .. } => {
            vec![FieldError::new(format!("{prefix}active"), e.to_string())]
        }
        CoreError::InvalidAccrual(_) => vec![FieldError::new("accrual.rates", e.to_string())],
        CoreError::TooFewReplicates(..) => {
            vec![FieldError::new("simulation.replicates", e.to_string())]
        }
        CoreError::InvalidGrid(_) => vec![FieldError::new("sweep", e.to_string())],
        CoreError::InvalidTolerance(_) => vec![FieldError::new("tolerance", e.to_string())],
        CoreError::InvalidTarget(_) => vec![FieldError::new("target_power", e.to_string())],
        _ => vec![FieldError::new("", e.to_string())],
    }
}
