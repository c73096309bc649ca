use alloc::string::String;

/// Errors raised by tensor construction, builders and solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TtError {
    #[error("empty core list")]
    Empty,
    #[error("boundary rank must be 1, got {0}")]
    BoundaryRank(usize),
    #[error("rank mismatch between core {core} (trailing {left}) and core {next} (leading {right})")]
    RankMismatch { core: usize, next: usize, left: usize, right: usize },
    #[error("core {0} has a zero dimension")]
    ZeroDim(usize),
    #[error("core {core}: data length {len} does not match shape")]
    DataLength { core: usize, len: usize },
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dense materialization of {entries} entries exceeds budget {budget}")]
    DenseBudget { entries: u128, budget: usize },
    #[error("first core is not block diagonal in the leading mode")]
    NotDiagonalSelector,
    #[error("grid node {0} lies on the indicator boundary")]
    NodeOnBoundary(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("right-hand side has zero norm")]
    ZeroRhs,
    #[error("singular triangular factor in least-squares solve")]
    SingularFactor,
    #[error("stabilisation bound nu = {0} is not below 2")]
    DegenerateNu(f64),
    #[error("dump parse error: {0}")]
    Parse(String),
}

pub type Result<T> = core::result::Result<T, TtError>;
