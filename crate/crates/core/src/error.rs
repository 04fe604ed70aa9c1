use thiserror::Error;

use crate::mmalg::IdealMask;

/// Every failure the library reports. Verification failures carry the
/// measured quantity so callers can print a diagnostic.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("element is not self-adjoint (deviation {0:.3e})")]
    NotSelfAdjoint(f64),
    #[error("element is not positive (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("element is not invertible (smallest eigenvalue {0:.3e})")]
    NotInvertible(f64),
    #[error("the ideal is the whole algebra; quotient is zero")]
    FullIdeal,
    #[error("spanning set is not a *-subalgebra (defect {0:.3e})")]
    NotSubalgebra(f64),
    #[error("weights must be strictly positive, one per block")]
    BadWeights,

    #[error("matrix is not a projection (defect {0:.3e})")]
    NotProjection(f64),
    #[error("vectors or operators belong to different modules")]
    ModuleMismatch,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("module is not full (untouched blocks {0:?})")]
    NotFull(Vec<usize>),

    #[error("left action is not a *-homomorphism (defect {0:.3e})")]
    NotHomomorphism(f64),
    #[error("left action is not unital (defect {0:.3e})")]
    NotUnital(f64),
    #[error("left action is not injective: block {0} acts as zero")]
    NotInjective(usize),
    #[error("operator does not commute with the left action (defect {0:.3e})")]
    NotLeftCommutant(f64),
    #[error("multiplet does not sum to the unit (defect {0:.3e})")]
    BadMultiplet(f64),
    #[error("operator degrees do not match: {0}")]
    DegreeMismatch(String),

    #[error("ideal enumeration limited to 20 blocks, got {0}")]
    TooManyBlocks(usize),
    #[error("ideal enumeration and irreducibility disagree")]
    InternalDisagreement,
    #[error("matrix has a zero row at vertex {0}")]
    ZeroRow(usize),
    #[error("ideal {0} is not invariant")]
    NotInvariant(IdealMask),
    #[error("ideal is not saturated; induced left action has kernel {kernel}")]
    NotSaturated { kernel: IdealMask },

    #[error("candidate is not in the relative commutant (defect {0:.3e})")]
    NotCommutant(f64),
    #[error("candidate norm is {0:.12} instead of 1")]
    NotNormOne(f64),
    #[error("complete isometry fails on block {block} (norm {norm:.3e})")]
    NotCompletelyIsometric { block: usize, norm: f64 },
    #[error("shifted overlap norm {0:.12} is not below 1")]
    Condition42Fails(f64),
    #[error("overlap norm {0:.12} leaves no margin for amplification")]
    MarginTooSmall(f64),
    #[error("conjugate vector is not central (defect {0:.3e})")]
    NotCentral(f64),
    #[error("conjugate equations fail (defect {0:.3e})")]
    ConjugateEquationsFail(f64),
    #[error("norm of the inverse of R*R is {0:.12}, not below 1")]
    IndexTooSmall(f64),
    #[error("conjugate-linear map violates its axioms: {0}")]
    BadF(String),
    #[error("conjugate datum construction failed: {0}")]
    ConstructionFailed(String),
    #[error("index of the expectation is trivial")]
    TrivialIndex,
    #[error("degenerate ideal is nonzero: {0}")]
    DegenerateIdealNonzero(IdealMask),
    #[error("matrix does not satisfy condition (I)")]
    ConditionIFails,
    #[error("cylinder search exhausted at depth cap {0}")]
    SearchExhausted(usize),

    #[error("conditional expectation is not faithful (smallest Gram eigenvalue {0:.3e})")]
    DegenerateExpectation(f64),
    #[error("not a conditional expectation: {0}")]
    NotExpectation(String),
    #[error("embedding is not a unital injective *-homomorphism: {0}")]
    BadEmbedding(String),
    #[error("bimodule is not of finite type: {0}")]
    NotFiniteType(String),
    #[error("index element is singular (smallest eigenvalue {0:.3e})")]
    SingularIndex(f64),

    #[error("degree {degree} exceeds the declared bound {limit}")]
    DegreeOverflow { degree: isize, limit: usize },
    #[error("Fock dimension {dim} exceeds the guard {limit}")]
    DimensionGuard { dim: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violation at {path}: {message}")]
    InvariantViolation { path: String, message: String },
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    /// Malformed or inconsistent input, as opposed to a mathematical rejection.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Parse(_) | Error::Schema { .. } | Error::InvariantViolation { .. } => true,
            Error::Stage { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    pub fn in_stage(stage: &'static str) -> impl Fn(Error) -> Error {
        move |e| Error::Stage { stage, source: Box::new(e) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
