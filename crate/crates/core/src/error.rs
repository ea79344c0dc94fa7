use thiserror::Error;

/// Errors produced by the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("unsupported basis convention: {0}")]
    UnsupportedConvention(String),
    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),
    #[error("invalid dissipator: {0}")]
    InvalidDissipator(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid time step: {0}")]
    InvalidStep(String),
    #[error("sampling grid: {0}")]
    SamplingGrid(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("rank: {0}")]
    Rank(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("control effect not identifiable: {0}")]
    Identifiability(String),
    #[error("invalid harmonic index {0}")]
    InvalidHarmonic(i64),
    #[error("quadrature accuracy: {0}")]
    Accuracy(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
