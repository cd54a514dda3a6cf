use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library reports. Variants map one-to-one onto the
/// documented error names of each operation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("base index {base} out of range for period {period}")]
    InvalidBase { base: usize, period: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no {0}-strong direction")]
    NoStrongDirection(usize),
    #[error("ill-conditioned modulus gap: {0}")]
    IllConditionedGap(String),
    #[error("not a saddle: {0}")]
    NotSaddle(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("subbundle not invariant (residual {residual:e})")]
    NotInvariant { residual: f64 },
    #[error("product determinant is negative, eigenvalues already real")]
    AlreadyRealizable,
    #[error("operation needs dimension 2, got {0}")]
    InvalidDim(usize),
    #[error("period too short: {0}")]
    PeriodTooShort(String),
    #[error("moduli not pairwise distinct: {0}")]
    ModuliNotDistinct(String),
    #[error("splitting still dominated (best angle {achieved_angle:.6}): {detail}")]
    StillDominated { achieved_angle: f64, detail: String },
    #[error("first-return eigenvalues are not all real")]
    EigenvaluesNotReal,
    #[error("both branches dominated: {0}")]
    BranchExhausted(String),
    #[error("endpoint mismatch of {0:e}")]
    EndpointMismatch(f64),
    #[error("glued map not invertible: {0}")]
    NotInvertible(String),
    #[error("incompatible concatenation: {0}")]
    IncompatibleConcatenation(String),
    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("stage {stage}: {source}")]
    Stage { stage: String, source: Box<Error> },
}

impl Error {
    pub fn at_stage(self, stage: &str) -> Error {
        Error::Stage { stage: stage.to_string(), source: Box::new(self) }
    }

    /// Innermost error once stage annotations are stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
