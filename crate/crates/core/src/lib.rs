//! Classical three-body dynamics in two equivalent representations: direct
//! Newtonian integration of the reduced 12D system, and geodesic flow on a
//! conformally Euclidean 6D manifold driven by per-step algebraic frame
//! solutions. On top of the deterministic layer sit geodesic deviation,
//! Langevin-type stochastic steppers with their Fokker-Planck reductions,
//! and scattering-channel / chaos-metric analysis.
//!
//! The per-point math kernels (coordinates, metric, frames, curvature) are
//! generic over the floating scalar; the integrators and the statistical
//! layer are `f64`.

pub mod analysis;
pub mod deviation;
pub mod error;
pub mod frames;
pub mod geodesic;
pub mod kinematics;
pub mod manifold;
pub mod newtonian;
pub mod ode;
pub mod scalar;
pub mod stochastic;
pub mod system;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

// Concrete f64 aliases for the scalar-generic kernels.
pub type MassTriple = kinematics::MassTriple<f64>;
pub type LabState = kinematics::LabState<f64>;
pub type JacobiState = kinematics::JacobiState<f64>;
pub type HypersphericalState = kinematics::HypersphericalState<f64>;
pub type GammaMetric = kinematics::GammaMetric<f64>;
pub type FrameSolution = frames::FrameSolution<f64>;
pub type ExternalFrameSolution = frames::ExternalFrameSolution<f64>;
pub type InverseFrameSolution = frames::InverseFrameSolution<f64>;
pub type SphereForm = frames::SphereForm<f64>;
pub type CurvatureBundle = manifold::CurvatureBundle<f64>;
