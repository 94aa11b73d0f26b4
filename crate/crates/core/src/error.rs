use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by lattice construction, the codec and the simulator.
///
/// Axis indices carried by variants are 1-based, matching how coordinates
/// are reported to users.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("generator is not lower triangular: entry ({row}, {col}) is nonzero")]
    NotLowerTriangular { row: usize, col: usize },

    #[error("generator diagonal entry {0} is not positive")]
    NonPositiveDiagonal(usize),

    #[error("M / g_ii is not an integer on axis {0}")]
    NonIntegerRadix(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not a lattice point: coordinate {0} does not back-solve to an integer")]
    NotALatticePoint(usize),

    #[error("point lies outside the cube on axis {0}")]
    OutOfCube(usize),

    #[error("enumeration of {size} items exceeds cap {cap}")]
    TooLarge { size: String, cap: u64 },

    #[error("symbol {value} on axis {axis} is outside 0..{radix}")]
    RangeViolation { axis: usize, value: u64, radix: u64 },

    #[error("codeword escapes the truncated block on axis {0}")]
    Phantom(usize),

    #[error("memory full: no block admits a monotone rewrite")]
    MemoryFull,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error: {0}")]
    Parse(String),
}
