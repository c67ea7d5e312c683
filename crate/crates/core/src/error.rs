use thiserror::Error;

use crate::qseries::C;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("series is zero")]
    ZeroSeries,
    #[error("constant term {0} is not negligible")]
    NonzeroConstantTerm(C),
    #[error("theta sum did not converge within {0} terms per side")]
    NonconvergedSum(usize),
    #[error("point {0} lies within the exclusion radius of a pole spiral")]
    NearPole(C),
    #[error("division by the zero operator")]
    ZeroDivisor,
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("operator is zero")]
    ZeroOperator,
    #[error("root finding failed: {0}")]
    RootFindingFailure(String),
    #[error("exponent is resonant: {0}")]
    ResonantExponent(String),
    #[error("slope {0} is not a slope of the operator")]
    SlopeMissing(String),
    #[error("1 is not an exponent at slope 0 (residual {0})")]
    ExponentMissing(f64),
    #[error("peeling stalled after {done} of {wanted} steps")]
    MultiplicityMismatch { done: usize, wanted: usize },
    #[error("need at least {needed} known coefficients, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("no convergent solution: obstruction values {values:?}")]
    ConvergentObstruction { values: Vec<C> },
    #[error("series tail {tail:e} dominates at |z| = {radius}")]
    TruncationDominates { tail: f64, radius: f64 },
    #[error("leading coefficient nearly vanishes at {0}")]
    DivisionNearZero(C),
    #[error("rank oracle unstable: {0}")]
    UnstableWindow(String),
    #[error("operator is not monic")]
    NotMonic,
    #[error("constant term of the operator is zero")]
    SingularConstantTerm,
    #[error("gauge matrix is not invertible")]
    SingularGauge,
    #[error("matrix A0 is not invertible")]
    SingularA0,
    #[error("syntax error at line {line}, column {col}: {msg}")]
    SyntaxError { line: usize, col: usize, msg: String },
    #[error("unknown symbol `{name}` at line {line}, column {col}")]
    UnknownSymbol { name: String, line: usize, col: usize },
}

impl Error {
    /// Stable identifier used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidContext(_) => "InvalidContext",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::ZeroSeries => "ZeroSeries",
            Error::NonzeroConstantTerm(_) => "NonzeroConstantTerm",
            Error::NonconvergedSum(_) => "NonconvergedSum",
            Error::NearPole(_) => "NearPole",
            Error::ZeroDivisor => "ZeroDivisor",
            Error::PrecisionExhausted(_) => "PrecisionExhausted",
            Error::ZeroOperator => "ZeroOperator",
            Error::RootFindingFailure(_) => "RootFindingFailure",
            Error::ResonantExponent(_) => "ResonantExponent",
            Error::SlopeMissing(_) => "SlopeMissing",
            Error::ExponentMissing(_) => "ExponentMissing",
            Error::MultiplicityMismatch { .. } => "MultiplicityMismatch",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::ConvergentObstruction { .. } => "ConvergentObstruction",
            Error::TruncationDominates { .. } => "TruncationDominates",
            Error::DivisionNearZero(_) => "DivisionNearZero",
            Error::UnstableWindow(_) => "UnstableWindow",
            Error::NotMonic => "NotMonic",
            Error::SingularConstantTerm => "SingularConstantTerm",
            Error::SingularGauge => "SingularGauge",
            Error::SingularA0 => "SingularA0",
            Error::SyntaxError { .. } => "SyntaxError",
            Error::UnknownSymbol { .. } => "UnknownSymbol",
        }
    }
}
