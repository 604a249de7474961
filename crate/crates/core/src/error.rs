use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classes used to map failures onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at offset {offset} is not an integer literal")]
    NonIntegerExponent { offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division by a series with zero leading term")]
    DivisionByZeroLeadingTerm,
    #[error("derivative order {requested} exceeds jet degree {degree}")]
    OrderExceeded { requested: usize, degree: usize },
    #[error("unknown surface `{0}`")]
    UnknownSurface(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("finite-difference levels disagree by {estimate:e}")]
    PrecisionLoss { estimate: f64 },
    #[error("no critical point found: {0}")]
    NoCriticalPointFound(String),
    #[error("constraint projection failed: {0}")]
    ProjectionFailure(String),
    #[error("step too large: projection moved the point by {moved:e} (limit {limit:e})")]
    StepTooLarge { moved: f64, limit: f64 },
    #[error("trajectory has {0} states, at least 3 are needed")]
    TooFewSteps(usize),
    #[error("zero velocity at step {0}")]
    ZeroVelocity(usize),
    #[error("unsupported surface for this operation: {0}")]
    UnsupportedSurface(String),
    #[error("wave function norm drifted by {0:e}")]
    NormDrift(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::NonIntegerExponent { .. }
            | Error::Domain(_)
            | Error::DivisionByZeroLeadingTerm
            | Error::OrderExceeded { .. }
            | Error::UnknownSurface(_)
            | Error::InvalidParameters(_)
            | Error::TooFewSteps(_)
            | Error::ZeroVelocity(_)
            | Error::UnsupportedSurface(_)
            | Error::InvalidInput(_) => ErrorClass::Input,
            Error::NoConvergence { .. }
            | Error::PrecisionLoss { .. }
            | Error::NoCriticalPointFound(_)
            | Error::ProjectionFailure(_)
            | Error::StepTooLarge { .. }
            | Error::NormDrift(_) => ErrorClass::Numerical,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::UnknownIdentifier { .. } => "UnknownIdentifier",
            Error::NonIntegerExponent { .. } => "NonIntegerExponent",
            Error::Domain(_) => "DomainError",
            Error::DivisionByZeroLeadingTerm => "DivisionByZeroLeadingTerm",
            Error::OrderExceeded { .. } => "OrderExceeded",
            Error::UnknownSurface(_) => "UnknownSurface",
            Error::InvalidParameters(_) => "InvalidParameters",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::PrecisionLoss { .. } => "PrecisionLoss",
            Error::NoCriticalPointFound(_) => "NoCriticalPointFound",
            Error::ProjectionFailure(_) => "ProjectionFailure",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::TooFewSteps(_) => "TooFewSteps",
            Error::ZeroVelocity(_) => "ZeroVelocity",
            Error::UnsupportedSurface(_) => "UnsupportedSurface",
            Error::NormDrift(_) => "NormDrift",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
