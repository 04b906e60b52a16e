use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structure violation: {0}")]
    Structure(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("matching condition violated: {0}")]
    MatchingViolation(String),
    #[error("point outside the domain of validity: {0}")]
    OutOfDomain(String),
    #[error("component tag mismatch: expected {expected}, found {found}")]
    TagMismatch { expected: String, found: String },
    #[error("quadrature diverges at the node: {0}")]
    QuadratureDivergence(String),
    #[error("mode j = 0 has no inverse of this form")]
    ZeroMode,
    #[error("near-singular denominator |2C + phi0| = {value:e} below {bound:e}")]
    NearSingularDenominator { value: f64, bound: f64 },
    #[error("cutoff radius {0} exceeds the neck extent")]
    CutoffSupport(f64),
    #[error("iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("operator is singular or indefinite: {0}")]
    SingularOperator(String),
    #[error("fixed-point iteration failed to contract: ratios {0:?}")]
    ContractionFailure(Vec<f64>),
    #[error("sweep needs at least {needed} values of R, got {got}")]
    InsufficientSweep { needed: usize, got: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error comes from configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InsufficientSweep { .. } | Error::TagMismatch { .. } | Error::Json(_)
        )
    }
}
