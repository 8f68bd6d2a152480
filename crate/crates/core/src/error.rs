use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported GBDF order {0}; expected 2, 3 or 4")]
    UnsupportedOrder(usize),
    #[error("invalid shift parameter beta = {0}; must exceed 1")]
    InvalidBeta(f64),
    #[error("history has {got} entries, expected {expected}")]
    WrongHistoryLength { expected: usize, got: usize },
    #[error("invalid mesh resolution {n}: {reason}")]
    InvalidResolution { n: usize, reason: &'static str },
    #[error("unstable element pair: velocity degree {deg_u} must equal pressure degree {deg_p} + 1")]
    UnstablePair { deg_u: usize, deg_p: usize },
    #[error("unsupported polynomial degree {0}; expected 1, 2 or 3")]
    UnsupportedDegree(usize),
    #[error("conductivity tensor is not symmetric positive definite at ({x}, {y})")]
    NonSpdConductivity { x: f64, y: f64 },
    #[error("tangential conductivity tau.K.tau = {0} is not positive")]
    DegenerateTangentialConductivity(f64),
    #[error("singular matrix ({rows}x{cols}): {reason}")]
    SingularMatrix { rows: usize, cols: usize, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SAV update denominator {denominator} is not positive (rho_max = {rho_max:?})")]
    NonPositiveDenominator { denominator: f64, rho_max: Option<f64> },
    #[error("exact-start initialisation requires an analytic solution")]
    MissingAnalyticSolution,
    #[error("fields live in different spaces")]
    SpaceMismatch,
    #[error("invalid conductivity specification: {0}")]
    InvalidSpec(String),
    #[error("zero leading coefficient in pressure recovery")]
    ZeroLeadingCoefficient,
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("config validation error at `{field}`: {message}")]
    ConfigValidation { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
