use thiserror::Error;

/// Failure data kept when GMRES stops without reaching the tolerance.
#[derive(Debug, Clone)]
pub struct Stalled {
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
    pub best: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("coincident points at ({x}, {y})")]
    Coincident { x: f64, y: f64 },
    #[error("charges are not neutral: sum q = {0:e}")]
    NonNeutralCharge(f64),
    #[error("net force is not zero: sum F = ({0:e}, {1:e})")]
    NetForce(f64, f64),
    #[error("target ({x}, {y}) lies on the boundary but is not flagged as on-surface")]
    AmbiguousSide { x: f64, y: f64 },
    #[error("bodies {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("density has {got} values, expected {expected}")]
    DensityLength { got: usize, expected: usize },
    #[error("reference field on body {0} has zero norm")]
    ZeroReference(usize),
    #[error("gmres stopped after {} iterations at relative residual {:e}", .0.iterations, .0.residual)]
    NoConvergence(Box<Stalled>),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("expansion center too close to the boundary")]
    CenterTooClose,
}

pub type Result<T> = std::result::Result<T, Error>;
