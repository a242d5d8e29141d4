use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("antenna index {index} out of range 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("direction (azimuth {azimuth}, elevation {elevation}) outside [-pi/2, pi/2]")]
    InvalidDirection { azimuth: f64, elevation: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("geometry mismatch between correlation matrix and subspace")]
    GeometryMismatch,

    #[error("quadrature too coarse: trace deviates by {deviation:.3e} (relative) before rescaling")]
    Accuracy { deviation: f64 },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {min:.3e}, max {max:.3e})")]
    NotPositiveSemidefinite { min: f64, max: f64 },

    #[error("pilot length {tau_p} outside [1, {max}]")]
    PilotLengthOutOfRange { tau_p: usize, max: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("concavity certificate failed: {0}")]
    Certificate(String),

    #[error("config: {0}")]
    Config(String),

    #[error("malformed matrix file: {0}")]
    MatrixFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
