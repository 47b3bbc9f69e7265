use thiserror::Error;

use crate::datum::Violation;
use crate::gaussian::ExtremiserResult;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid datum: {}", format_violations(.0))]
    InvalidDatum(Vec<Violation>),

    #[error("scaling condition violated: sum p_j n_j - n = {residual}")]
    ScalingViolation { residual: f64 },

    #[error("rank-one mode requires n_j = 1, map {} has {rows} rows", .index + 1)]
    NotRankOne { index: usize, rows: usize },

    #[error("too many maps for exhaustive enumeration: m = {m}, limit {limit}")]
    TooManyMaps { m: usize, limit: usize },

    #[error("M is singular; null direction {null_direction:?}")]
    SingularM { null_direction: Vec<f64> },

    #[error("block {} is not symmetric positive definite", .index + 1)]
    NotPositiveDefinite { index: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("extremiser iteration diverged after {iterations} iterations (residual {residual}): {reason}")]
    Diverged { iterations: usize, residual: f64, reason: String },

    #[error("extremiser iteration did not converge within {} iterations (residual {})", .last.iterations, .last.residual)]
    MaxIterExceeded { last: Box<ExtremiserResult> },

    #[error("scale {delta} outside (0, 1/e)")]
    DeltaOutOfRange { delta: f64 },

    #[error("datum {} in the family has no converged extremiser", .index + 1)]
    Unsolved { index: usize },

    #[error("exponent {value} at index {} is invalid", .index + 1)]
    InvalidExponent { index: usize, value: f64 },

    #[error("input {} has zero estimated mass", .index + 1)]
    ZeroDenominator { index: usize },

    #[error("integration domain too small: {:.3}% of the mass sits in the boundary layer", .boundary_fraction * 100.0)]
    DomainTooSmall { boundary_fraction: f64 },

    #[error("quadrature spec needs an integration domain")]
    MissingDomain,

    #[error("invalid quadrature settings: {0}")]
    InvalidQuadrature(String),

    #[error("operation unsupported in dimension {dim}")]
    UnsupportedDimension { dim: usize },

    #[error("every localized tuple h^x on the grid is degenerate")]
    DegenerateLocalization,

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("input {} is not {kappa}-constant at scale {mu}: f(x)/f(y) = {ratio} at x = {x:?}, y = {y:?}", .index + 1)]
    Uncertified { index: usize, kappa: f64, mu: f64, ratio: f64, x: Vec<f64>, y: Vec<f64> },

    #[error("threshold condition violated: delta^(alpha+beta') = {threshold} vs mu = {mu} ({expected} regime required)")]
    ThresholdViolated { threshold: f64, mu: f64, expected: &'static str },

    #[error("linearization deviation {deviation} exceeds mu = {mu}; delta lies outside the working neighbourhood")]
    LinearizationTooLarge { deviation: f64, mu: f64 },

    #[error("point at distance {distance} lies outside the allowed radius {radius}")]
    OutsideNeighbourhood { distance: f64, radius: f64 },

    #[error("unknown registry tag `{tag}` (available: {})", .available.join(", "))]
    UnknownTag { tag: String, available: Vec<String> },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("schedule needs more than {limit} steps")]
    ScheduleOverflow { limit: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        let text = e.to_string();
        // serde_json appends the position, which is already in the variant.
        let message = match text.rsplit_once(" at line ") {
            Some((m, _)) => m.to_string(),
            None => text,
        };
        Error::Parse { line: e.line(), column: e.column(), message }
    }
}
