use thiserror::Error;

/// Every domain failure the library can report.
///
/// Variants carry enough context to produce the single-line error JSON the
/// command line tool writes to stderr.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid ellipticity pair: lambda = {lambda}, Lambda = {big_lambda}")]
    InvalidEllipticity { lambda: f64, big_lambda: f64 },
    #[error("dimension must be an integer >= 2, got {0}")]
    InvalidDimension(u32),
    #[error("mu = {mu} exceeds the principal eigenvalue {lambda_bar}")]
    MuAboveEigenvalue { mu: f64, lambda_bar: f64 },
    #[error("degenerate exponent pair (tau_minus = {tau_minus}, tau_plus = {tau_plus})")]
    DegenerateTau { tau_minus: f64, tau_plus: f64 },
    #[error("exponent p = {0} must be > 1")]
    SublinearExponent(f64),
    #[error("amplitude K undefined for p = {p} in [p*, p**] = [{p_star}, {p_star_star}]")]
    KUndefined { p: f64, p_star: f64, p_star_star: f64 },
    #[error("non-positive sample u = {value} at node {node}")]
    NonPositiveSample { node: usize, value: f64 },
    #[error("grid needs at least {needed} nodes, got {got}")]
    GridTooSmall { needed: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("array length {got} does not match grid length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("constraint violated: {name} (margin {margin:e})")]
    ConstraintViolation { name: String, margin: f64 },
    #[error("barrier {kind} requires regime {required}, got {actual}")]
    RegimeMismatch {
        kind: String,
        required: String,
        actual: String,
    },
    #[error("r = {r} outside validity range (0, {validity_radius}]")]
    OutOfValidity { r: f64, validity_radius: f64 },
    #[error("sign certification failed at node {node} (r = {r:e}, relative margin {margin:e})")]
    CertificationFailure { node: usize, r: f64, margin: f64 },
    #[error("negative Emden-Fowler state x = {0}")]
    NegativeX(f64),
    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("tail has {got} usable points, need {needed}")]
    InsufficientTail { got: usize, needed: usize },
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("discrete operator is not monotone: log step {h} exceeds {h_max}")]
    NonMonotoneOperator { h: f64, h_max: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("monotonicity violated at iteration {iteration}, node {node} (r = {r:e}, drop {drop:e})")]
    MonotonicityViolation {
        iteration: usize,
        node: usize,
        r: f64,
        drop: f64,
    },
    #[error("bracket violated at iteration {iteration}, node {node} (r = {r:e}): {side}")]
    BracketViolation {
        iteration: usize,
        node: usize,
        r: f64,
        side: String,
    },
    #[error("ambiguous asymptotic class: {0}")]
    AmbiguousClass(String),
    #[error("tail too short: samples reach r = {r_min:e}, need {needed:e}")]
    TailTooShort { r_min: f64, needed: f64 },
    #[error("bound violated: {quantity} at node {node} (r = {r:e})")]
    BoundViolation {
        quantity: String,
        node: usize,
        r: f64,
    },
    #[error("comparison hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("growth hypothesis violated at node {node} (r = {r:e}): {detail}")]
    GrowthHypothesisViolation { node: usize, r: f64, detail: String },
}

impl Error {
    /// Stable machine-readable tag, the variant name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidEllipticity { .. } => "InvalidEllipticity",
            Error::InvalidDimension(_) => "InvalidDimension",
            Error::MuAboveEigenvalue { .. } => "MuAboveEigenvalue",
            Error::DegenerateTau { .. } => "DegenerateTau",
            Error::SublinearExponent(_) => "SublinearExponent",
            Error::KUndefined { .. } => "KUndefined",
            Error::NonPositiveSample { .. } => "NonPositiveSample",
            Error::GridTooSmall { .. } => "GridTooSmall",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ConstraintViolation { .. } => "ConstraintViolation",
            Error::RegimeMismatch { .. } => "RegimeMismatch",
            Error::OutOfValidity { .. } => "OutOfValidity",
            Error::CertificationFailure { .. } => "CertificationFailure",
            Error::NegativeX(_) => "NegativeX",
            Error::StepFailure { .. } => "StepFailure",
            Error::InsufficientTail { .. } => "InsufficientTail",
            Error::NewtonDivergence { .. } => "NewtonDivergence",
            Error::NonMonotoneOperator { .. } => "NonMonotoneOperator",
            Error::InvalidProblem(_) => "InvalidProblem",
            Error::InvalidInput(_) => "InvalidInput",
            Error::MonotonicityViolation { .. } => "MonotonicityViolation",
            Error::BracketViolation { .. } => "BracketViolation",
            Error::AmbiguousClass(_) => "AmbiguousClass",
            Error::TailTooShort { .. } => "TailTooShort",
            Error::BoundViolation { .. } => "BoundViolation",
            Error::HypothesisViolation(_) => "HypothesisViolation",
            Error::GrowthHypothesisViolation { .. } => "GrowthHypothesisViolation",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
