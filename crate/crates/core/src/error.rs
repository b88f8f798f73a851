use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch: expected {expected} variables, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("pencil has all coefficients zero")]
    ZeroPencil,

    #[error("pencil is degenerate (coefficients are linearly dependent)")]
    DegeneratePencil,

    #[error("input lies outside the map's domain (distance {distance:.3e})")]
    DomainViolation { distance: f64 },

    #[error("operation needs the full square matrix space as domain")]
    NotSquareDomain,

    #[error("decomposition recovery failed (residual {residual:.3e})")]
    RecoveryFailed { residual: f64 },

    #[error("map has nonzero constant term (norm {norm:.3e})")]
    NonzeroConstantTerm { norm: f64 },

    #[error("lambda^{power} = {value:.3e} is below the extraction floor")]
    NumericalUnderflow { power: usize, value: f64 },

    #[error("I - v*u is numerically singular (condition {condition:.3e})")]
    SingularResolvent { condition: f64 },

    #[error("constant term has norm {norm:.3e}, not a strict contraction")]
    BoundaryConstantTerm { norm: f64 },

    #[error("parameter is not a strict contraction (norm {norm:.3e})")]
    NotContraction { norm: f64 },

    #[error("black-box evaluator is not block-consistent (gap {gap:.3e})")]
    InconsistentEvaluator { gap: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at {pointer}: {message}")]
    Parse { pointer: String, message: String },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
