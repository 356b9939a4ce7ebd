use thiserror::Error;

use crate::family::Diagnostic;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polynomial needs at least one coefficient")]
    EmptyCoefficients,
    #[error("coefficient is not finite")]
    NonFiniteCoefficient,
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("leading coefficient is zero")]
    ZeroLeadingCoefficient,
    #[error("interval bound order violated at coefficient {index}: lower {lower} > upper {upper}")]
    BoundOrderViolation { index: usize, lower: f64, upper: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("column reduction needs every entry outside column {col} fixed")]
    NotSingleColumnFamily { col: usize },
    #[error("row reduction needs only cells ({row},{i}) and ({row},{j}) uncertain")]
    NotTwoCellFamily { row: usize, i: usize, j: usize },
    #[error("leading coefficient range [{lo}, {hi}] reaches zero")]
    DegreeDrop { lo: f64, hi: f64 },
    #[error("interval analysis is only defined for the Hurwitz half-plane")]
    RegionNotHurwitz,
    #[error("Routh array has an all-zero row at index {row}")]
    IndeterminateRouthRow { row: usize },
    #[error("family failed validation: {}", summarize(.0))]
    ValidationFailure(Vec<Diagnostic>),
    #[error("matrix size {n} exceeds the driver limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("configuration count does not fit in 64 bits")]
    CountOverflow,
    #[error("invalid tolerances: {0}")]
    InvalidTolerances(String),
    #[error("internal error: {0}")]
    Internal(String),
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
