use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("shooting interval [{lo}, {hi}] does not bracket the ground state")]
    NonBracketedShoot { lo: f64, hi: f64 },
    #[error("profile integration blew up: {0}")]
    BlowUp(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConverged(String),
    #[error("centers {i} and {j} are closer than the kernel domain allows (distance {distance})")]
    TooClose { i: usize, j: usize, distance: f64 },
    #[error("step size underflow at s = {s} (h = {h})")]
    StepFailure { s: f64, h: f64 },
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error("inequality `{name}` violated by {margin:e} at c = {witness:?}")]
    InequalityViolated { name: String, margin: f64, witness: [f64; 3] },
    #[error("triangle hypotheses not met")]
    HypothesisUnmet,
    #[error("trajectory ended in a collision at s = {s}")]
    Collision { s: f64 },
    #[error("insufficient span: {0}")]
    InsufficientSpan(String),
    #[error("invalid simulation setup: {0}")]
    InvalidSetup(String),
}

pub type Result<T> = std::result::Result<T, Error>;
