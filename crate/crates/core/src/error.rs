use thiserror::Error;

/// Errors raised by the arithmetic, summation and moment routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("exponent must be at least {min}, got {got}")]
    ExponentTooSmall { min: u32, got: u32 },
    #[error("modulus {p}^{n} does not fit in 64 bits")]
    ModulusOverflow { p: u64, n: u32 },
    #[error("mismatched primes {0} and {1}")]
    PrimeMismatch(u64, u64),
    #[error("{0} is not a unit")]
    NotUnit(u64),
    #[error("{0} is not congruent to 1 modulo p")]
    NotOneModP(u64),
    #[error("{0} is not a quadratic residue modulo {1}")]
    NonResidue(u64, u64),
    #[error("division loses more precision than is available (ord {divisor} > ord {dividend})")]
    InexactDivision { dividend: u32, divisor: u32 },
    #[error("requested precision {requested} exceeds available precision {available}")]
    InsufficientPrecision { requested: u32, available: u32 },
    #[error("starting value is not a root modulo p^{0}")]
    NotARoot(u32),
    #[error("derivative vanishes modulo p at the starting root")]
    SingularLift,
    #[error("Newton iteration did not converge")]
    NoConvergence,
    #[error("phase hypotheses are not declared: {0}")]
    HypothesesAbsent(String),
    #[error("phase hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("domain classes mod p^{lambda} are incompatible with translation by p^{ell}")]
    DomainIncompatible { lambda: u32, ell: u32 },
    #[error("character is not primitive (conductor p^{conductor_exp}, modulus p^{n})")]
    Imprimitive { conductor_exp: u32, n: u32 },
    #[error("invalid trace-sum parameters: {0}")]
    InvalidParameters(String),
    #[error("quadrature did not converge on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64 },
    #[error("Postnikov verification failed at k = {k}")]
    PostnikovMismatch { k: u64 },
    #[error("cache error: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
