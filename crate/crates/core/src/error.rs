use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability {value} outside [0, 1] for {what}")]
    InvalidProbability { what: &'static str, value: f64 },

    #[error("qubit count mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported qubit count {0}")]
    UnsupportedQubitCount(usize),

    #[error("site {site} out of range for {n} qubits")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("site {0} listed twice")]
    SiteCollision(usize),

    #[error("invalid Pauli label {0:?}")]
    InvalidPauliLabel(String),

    #[error("channel is not a probability distribution: {0}")]
    InvalidChannel(String),

    #[error("clifford map violates the symplectic condition: {0}")]
    NotSymplectic(String),

    #[error("variance must be finite and non-negative, got {0}")]
    InvalidVariance(f64),

    #[error("homodyne efficiency must satisfy 0 < eta <= 1, got {0}")]
    InvalidEfficiency(f64),

    #[error("noise covariance is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("measurement basis {0} has no Pauli-flip model; use the rotation path")]
    NonPauliBasis(String),

    #[error("error location does not belong to this pattern: {0}")]
    LocationMismatch(String),

    #[error("pattern is not deterministic: {0}")]
    InvalidPattern(String),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("exact simulation of {n} qubits exceeds the limit of {max}")]
    ExactModeTooLarge { n: usize, max: usize },

    #[error("malformed output distribution: {0}")]
    InvalidDistribution(String),

    #[error("model circuit width must be at least 2, got {0}")]
    InvalidWidth(usize),

    #[error("{0}")]
    InvalidArgument(String),
}

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidProbability { what, value })
    }
}
