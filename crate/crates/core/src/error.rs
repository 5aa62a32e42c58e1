use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by every module of the toolkit.
///
/// Anything that can be reported in-band (an undetermined valuation, a probe
/// that finds no hit) is data, not an error; this enum is reserved for
/// violated preconditions and genuinely failed computations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("precision must be at least 1 digit")]
    ZeroPrecision,

    #[error("operands track different primes ({left} vs {right})")]
    PrimeMismatch { left: u64, right: u64 },

    #[error("cannot invert a value that is zero to the tracked precision")]
    ZeroInversion,

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("outside the convergence domain: {0}")]
    DomainViolation(String),

    #[error("Hensel precondition failed: {0}")]
    HenselPrecondition(String),

    #[error("Hensel iteration exceeded its budget: {0}")]
    HenselDiverged(String),

    #[error("invalid recurrence: {0}")]
    InvalidRecurrence(String),

    #[error("invalid root factorization: {0}")]
    InvalidFactorization(String),

    #[error("singular coefficient matrix: {0}")]
    SingularSystem(String),

    #[error("sequence is identically zero")]
    DegenerateSequence,

    #[error("certificate construction failed: {0}")]
    Certificate(String),

    #[error("certificate not constructible here: {0}")]
    CertificateUnsupported(String),

    #[error("{0}")]
    InvalidArgument(String),
}
