use thiserror::Error;

/// Errors raised by the solvers and validators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("empty state space")]
    Empty,

    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("marginals carry different total mass ({row_total} vs {col_total})")]
    InfeasibleMarginals { row_total: f64, col_total: f64 },

    #[error("instance too large for brute force: n = {n}, limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("coupling is invalid at pair ({x}, {x_prime}): {reason}")]
    InvalidCoupling {
        x: usize,
        x_prime: usize,
        reason: String,
    },

    #[error("absorbing system is numerically singular")]
    SingularSystem,

    #[error("no power of the kernel contracts in total variation")]
    NoContraction,

    #[error("closed forms need a two-state chain, got {n} states")]
    NotTwoState { n: usize },

    #[error("kernel is not irreducible")]
    NotIrreducible,

    #[error("problem is not a coupling-time instance (needs P = P', discrete cost, beta = 1)")]
    NotCouplingInstance,

    #[error("variance proxy is infinite")]
    InfiniteProxy,

    #[error("discounted sum cannot be safely truncated: {0}")]
    TruncationUnsafe(String),

    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),

    #[error("unknown state label {0:?}")]
    UnknownState(String),

    #[error("state index {index} out of range for {n} states")]
    StateOutOfRange { index: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
