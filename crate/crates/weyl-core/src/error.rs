use thiserror::Error;

/// Errors raised by the representation, lattice and solver layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum WeylError {
    #[error("invalid dimension N = {0}: need N >= 3")]
    InvalidN(usize),
    #[error("invalid parameter tuple n = {n:?} for N = {dim}: {reason}")]
    InvalidTuple { dim: usize, n: Vec<i64>, reason: String },
    #[error("InvalidNu: nu = {re}{im:+}i matches no admissible series for N = {dim}, n = {n:?}")]
    InvalidNu { dim: usize, n: Vec<i64>, re: f64, im: f64 },
    #[error("invalid m = {m:?}: {reason}")]
    InvalidM { m: Vec<i64>, reason: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("height {height} lies below the floor height {floor}")]
    HeightBelowFloor { height: i64, floor: i64 },
    #[error("parity mismatch: {0}")]
    ParityMismatch(String),
    #[error("path enumeration exceeded the cap of {cap} paths")]
    PathCapExceeded { cap: usize },
    #[error("C coefficient has a vanishing denominator at m = {m:?}")]
    SingularC { m: Vec<i64> },
    #[error("division by |{value:.3e}| < 1e-12 at m = {m:?}")]
    DivisionNearZero { m: Vec<i64>, value: f64 },
    #[error("bound violated: {check} at m = {m:?} (value {value})")]
    BoundViolation { check: String, m: Vec<i64>, value: f64 },
    #[error("fitted constant drifted: {check} ({detail})")]
    UnboundedTrend { check: String, detail: String },
    #[error("non-positive Laplace eigenvalue {value} at m = {m:?}")]
    NonPositiveEigenvalue { m: Vec<i64>, value: f64 },
    #[error("distribution computed to height {computed}, need {needed}")]
    InsufficientHeight { computed: i64, needed: i64 },
    #[error("nonzero obstructions: {0}")]
    ObstructionNonzero(String),
    #[error("Gram matrix condition number {0:.3e} exceeds 1e12")]
    IllConditioned(f64),
    #[error("the trivial representation is not accepted here")]
    TrivialRepresentation,
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("degree {degree} cannot be raised in rank {rank}")]
    DegreeOverflow { degree: usize, rank: usize },
    #[error("form is not closed: |d omega| = {0:.3e}")]
    NotClosed(f64),
    #[error("slice solutions disagree by {0:.3e}")]
    SlicesDisagree(f64),
    #[error("input is not M-invariant or a factor admits no M-invariant vectors")]
    NotMInvariant,
    #[error("representation mismatch: {0}")]
    SpecMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, WeylError>;
