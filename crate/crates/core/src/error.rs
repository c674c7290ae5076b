use thiserror::Error;

#[derive(Debug, Error)]
pub enum MrcError {
    #[error("diagonal entry {index} is {value}, expected 1")]
    NotUnitDiagonal { index: usize, value: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },
    #[error("diagonal entry {index} is not strictly positive ({value})")]
    NonpositiveDiagonal { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("monomial degree {degree} exceeds the cap {cap}")]
    DegreeLimitExceeded { degree: u32, cap: u32 },
    #[error("speed sum for pair ({i}, {j}) is zero")]
    ZeroSpeedPair { i: usize, j: usize },
    #[error("alpha = {alpha} is not integrable for d = {dim} (need alpha > d - 2)")]
    NonIntegrableAlpha { alpha: f64, dim: usize },
    #[error("operation requires d = {expected}, got d = {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("state left the domain: {0}")]
    LeftDomain(String),
    #[error("step {t} exceeds the maximal step 2/5")]
    StepTooLarge { t: f64 },
    #[error("index level must be positive, got {0}")]
    NonpositiveIndex(f64),
    #[error("option price {price} is outside the arbitrage bounds [{lower}, {upper})")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("weights sum to {0}, expected about 100")]
    WeightSum(f64),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MrcError {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            MrcError::Usage(_) | MrcError::InvalidParameter(_) => 2,
            MrcError::Io(_) | MrcError::Parse(_) | MrcError::WeightSum(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, MrcError>;
