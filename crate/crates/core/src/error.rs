use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index discipline violated: {0}")]
    IndexDiscipline(String),
    #[error("total derivative would exceed the maximum jet order 4 ({0})")]
    OrderOverflow(String),
    #[error("substitution failed: {0}")]
    Substitution(String),
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("unsupported jet order: {0}")]
    UnsupportedOrder(String),
    #[error("invalid Jacobian block id `{0}`")]
    InvalidBlock(String),
    #[error("unknown basis vector `{0}`")]
    UnknownBasis(String),
    #[error("Lagrangian is not affine in second-order jets: {0}")]
    NonAffine(String),
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("metric signature is not Lorentzian (-,+,+,+): {0}")]
    Signature(String),
    #[error("missing value for symbol {0}")]
    MissingSymbol(String),
    #[error("inapplicable case: {0}")]
    Inapplicable(String),
    #[error("singular velocity inversion: {0}")]
    SingularInversion(String),
    #[error("finite-difference step underflow: {0}")]
    StepUnderflow(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
