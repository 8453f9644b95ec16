use thiserror::Error;

/// Which triangular factorization a failed minor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Upper principal minors d⁺ (the a₋ factorization).
    Upper,
    /// Lower principal minors d⁻ (the a₊ factorization).
    Lower,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Upper => f.write_str("upper"),
            Side::Lower => f.write_str("lower"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix data has {len} entries, expected {n}x{n}")]
    ShapeMismatch { n: usize, len: usize },
    #[error("dimension {0} outside the supported range 2..=8")]
    UnsupportedDimension(usize),
    #[error("non-finite matrix entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("index sets have cardinalities {rows} and {cols}")]
    InvalidIndexSets { rows: usize, cols: usize },
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("{side} principal minor of order {order} vanishes: point is outside the big cell")]
    NotInGLStar { order: usize, side: Side },
    #[error("leading minor of order {0} vanishes")]
    SingularLeadingMinor(usize),
    #[error("invalid transposition schedule: {0}")]
    InvalidSchedule(String),
    #[error("chart is degenerate at block {0}")]
    DegeneratePoint(usize),
    #[error("generator trace {0:e} is not zero")]
    TraceNotZero(f64),
    #[error("integration step size collapsed at t = {0}")]
    StepFailure(f64),
    #[error("trajectory left the big cell at t = {0}")]
    StratumExit(f64),
    #[error("quadratic roots coincide")]
    CoincidentRoots,
    #[error("elliptic integration path crosses a branch cut")]
    BranchPathFailure,
    #[error("potential norm {norm} exceeds the cap {cap}")]
    NormTooLarge { norm: f64, cap: f64 },
    #[error("hierarchy recursion inconsistent: residual {0:e}")]
    RecursionInconsistency(f64),
    #[error("{flagged} of {total} nodes lack a factorization")]
    FlaggedNodesExceeded { flagged: usize, total: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
