use alloc::string::String;

/// Errors raised by the consensus toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symmetric (max |m_ij - m_ji| = {max_deviation:e})")]
    Asymmetric { max_deviation: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("schedule has no phases")]
    EmptySchedule,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("schedule violates the joint-connectivity or dwell-time assumptions: {0}")]
    AssumptionViolated(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Gramian singular: smallest eigenvalue {min_eigenvalue:e} (pair not controllable/observable)")]
    GramianSingular { min_eigenvalue: f64 },

    #[error("rank deficient: {what} has rank {rank}, need {required}")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        required: usize,
    },

    #[error("mu = {mu} is below the required floor {floor}")]
    MuBelowFloor { mu: f64, floor: f64 },

    #[error("instability budget delta = {0} outside [0, 1)")]
    BudgetOutOfRange(f64),

    #[error("no admissible lambda*: lambda_max(A) = {lambda_max} is not below the margin {margin}")]
    InfeasibleRate { lambda_max: f64, margin: f64 },

    #[error("scenario lacks the {0} gain required by this mode")]
    MissingGain(&'static str),

    #[error("switching instant {boundary} is not an integer multiple of the step {step}")]
    MisalignedSwitch { boundary: f64, step: f64 },

    #[error("{0} failed to converge")]
    NoConvergence(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
