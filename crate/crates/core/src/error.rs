use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty candidate set")]
    EmptyCandidate,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: String, right: String },
    #[error("grid resolution {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("empty accumulator has no empirical measure")]
    EmptyAccumulator,
    #[error("orbit escaped numeric range at step {step}")]
    OrbitEscaped { step: u64 },
    #[error("cycle depth exceeds representable range")]
    CycleDepthOverflow,
    #[error("inconclusive ledger: {0}")]
    InconclusiveLedger(String),
    #[error("alpha unreachable: requested {alpha}, full space attracts {achieved}")]
    AlphaUnreachable { alpha: f64, achieved: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
