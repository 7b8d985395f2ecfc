//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),

    #[error("bodies coincide: pair distance {0} is not positive")]
    CoincidentBodies(f64),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("turning surface reached: total energy equals the potential (E - U = {residual:.3e}) at s = {s}")]
    BoundaryContact { s: f64, residual: f64 },

    #[error("state lies in the forbidden region: E - U = {0:.3e} < 0")]
    ForbiddenRegion(f64),

    #[error("point sits on the turning surface: E - U = {e_minus_u:.3e}")]
    TurningSurface { e_minus_u: f64 },

    #[error("frame solve failed: {0}")]
    FrameDegenerate(String),

    #[error("frame residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    FrameResidual { residual: f64, tol: f64 },

    #[error("normalized-triple domain violated: sigma_{index} = {value:.3e} <= 0")]
    SigmaDomain { index: usize, value: f64 },

    #[error("step size underflow at s = {0}")]
    StepUnderflow(f64),

    #[error("step limit exceeded after {0} steps")]
    StepLimit(usize),

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stability condition violated: {0}")]
    CflViolation(String),

    #[error("density supports are disjoint after smoothing")]
    DisjointSupports,

    #[error("no admissible solution found: {0}")]
    NoSolution(String),

    #[error("trajectories are not comparable: {0}")]
    Incomparable(String),
}
