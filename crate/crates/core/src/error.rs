use thiserror::Error;

use crate::lindblad::Condition;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix has eigenvalue {0:e} below the PSD tolerance")]
    NotPositive(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("damping rate {0} is negative")]
    NegativeRate(f64),

    #[error("time {0} is negative")]
    NegativeTime(f64),

    #[error("unsupported system: condition {condition} fails with residual {residual:e}")]
    Unsupported { condition: Condition, residual: f64 },

    #[error("Kraus term count {count} exceeds the cap of {cap}")]
    TermCap { count: u128, cap: usize },

    #[error("truncation bound not applicable at order {order}: f(t)·|L| = {x} >= order + 1")]
    BoundNotApplicable { order: usize, x: f64 },

    #[error("no truncation order up to {cap} meets the requested tolerance")]
    OrderCap { cap: usize },

    #[error("Lindblad superoperators {0} and {1} do not commute")]
    NonCommuting(usize, usize),

    #[error("operator norm {0} exceeds 1; not a contraction")]
    NotContraction(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("effective Hamiltonian is not normal (commutator norm {0:e})")]
    NonNormal(f64),

    #[error("duplicate Pauli string {0}")]
    DuplicatePauli(String),

    #[error("invalid Pauli string {0:?}")]
    ParsePauli(String),

    #[error("{0}")]
    OutOfRange(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical tolerance exceeded: {0}")]
    Tolerance(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status used by the command-line tool: 1 for I/O, 2 for
    /// invalid input, 3 for systems outside the supported class, 4 for
    /// numerical tolerance failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 1,
            Error::Unsupported { .. } | Error::NonCommuting(..) | Error::NonNormal(_) => 3,
            Error::Tolerance(_)
            | Error::TermCap { .. }
            | Error::OrderCap { .. }
            | Error::BoundNotApplicable { .. }
            | Error::NotContraction(_)
            | Error::NotUnitary(_) => 4,
            _ => 2,
        }
    }
}
