use thiserror::Error;

/// Errors raised across filter synthesis, operator construction and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("empty coefficient sequence")]
    EmptyCoefficients,
    #[error("NotProper: denominator degree {den} must exceed numerator degree {num}")]
    NotProper { num: usize, den: usize },
    #[error("ZeroLeadingCoefficient: {0} polynomial is identically zero")]
    ZeroLeadingCoefficient(&'static str),
    #[error("non-finite coefficient in {0} polynomial")]
    NonFiniteCoefficient(&'static str),
    #[error("PoleOnImaginaryAxis: denominator vanishes at s = {0}i")]
    PoleOnImaginaryAxis(f64),
    #[error("UnsupportedPoleStructure: {0}")]
    UnsupportedPoleStructure(String),
    #[error("SamplePointOnPole: denominator vanishes at s = {0}")]
    SamplePointOnPole(String),
    #[error("SingularVandermondeLike: interpolation points must be distinct")]
    SingularVandermondeLike,
    #[error("expected {expected} interpolation points, got {got}")]
    WrongPointCount { expected: usize, got: usize },
    #[error("TimeOutOfRange: t = {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("QuadratureNotConverged: max element change {delta:e} after {panels} panels")]
    QuadratureNotConverged { delta: f64, panels: usize },
    #[error("ResonantParameters: oscillatory block denominator vanishes at index {index}")]
    ResonantParameters { index: usize },
    #[error("SingularDenominatorMatrix: condition estimate {condition:e}")]
    SingularDenominatorMatrix { condition: f64 },
    #[error("SingularOperator: condition estimate {condition:e}")]
    SingularOperator { condition: f64 },
    #[error("GridMismatch: {0}")]
    GridMismatch(String),
    #[error("DegenerateFit: {0}")]
    DegenerateFit(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("write failed: {0}")]
    Io(String),
}

impl FilterError {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            FilterError::QuadratureNotConverged { .. }
                | FilterError::ResonantParameters { .. }
                | FilterError::SingularDenominatorMatrix { .. }
                | FilterError::SingularOperator { .. }
                | FilterError::DegenerateFit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, FilterError>;
