use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate system label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown system label `{0}`")]
    UnknownLabel(String),
    #[error("system `{0}` has dimension zero")]
    ZeroDim(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("label groups overlap on `{0}`")]
    OverlappingGroups(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("not an isometry: max |U^dag U - 1| = {0:.3e}")]
    NotIsometry(f64),
    #[error("channel is not trace preserving: max |sum K^dag K - 1| = {0:.3e}")]
    NotTracePreserving(f64),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("requested rank {rank} outside 1..={max}")]
    BadRank { rank: usize, max: usize },
    #[error("dimension {dim} exceeds the dense feasibility cap {cap}")]
    DimTooLarge { dim: usize, cap: usize },
    #[error("block length {n} exceeds the audited maximum {max}")]
    BlockLengthTooLarge { n: usize, max: usize },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("average state is numerically singular on its support")]
    SingularAverage,
    #[error("center eigenvalues collided in {retries} random splits")]
    DegenerateCenterSplit { retries: usize },
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("no irreducible block sample after {attempts} attempts")]
    IrreducibilityFailure { attempts: usize },
    #[error("no feasible point found")]
    NoFeasiblePoint,
    #[error("step `{step}` violated with slack {slack:.3e}")]
    SlackViolation { step: String, slack: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
