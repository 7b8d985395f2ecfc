//! Masses, Jacobi and hyperspherical coordinates, the Euclidean metric tensor
//! of the rotating-triangle decomposition, and kinetic-energy identities.
//!
//! Conventions used throughout the crate:
//!
//! * `R` is the displacement of body 2 from body 3, `r` the displacement of
//!   body 1 from the pair's center of mass.
//! * The one-particle representation uses mass-scaled vectors
//!   `q_r = sqrt(mu3/mu0) r`, `q_R = sqrt(mu2/mu0) R`, so that both carry the
//!   common effective mass `mu0` and the kinetic energy is
//!   `(mu0/2)(|dq_r/dt|^2 + |dq_R/dt|^2)`.
//! * Euler angles are intrinsic z-x-z: body-to-lab rotation
//!   `Rz(Phi) Rx(Theta) Rz(Psi)`, with the body z axis along `q_R` and the
//!   body plane spanned so that `q_r = r (sin(theta), 0, cos(theta))` in body
//!   coordinates.

mod metric;
pub mod potential;

pub use metric::{
    euler_rotation, body_angular_velocity, gamma_metric, kinetic_energy, kinetic_energy_angular,
    kinetic_energy_cartesian, coriolis_coupling, GammaMetric, HypersphericalRates,
};

use crate::error::Error;
use crate::scalar::Real;
use crate::Result;
use nalgebra::Vector3;

/// The three masses together with every derived mass combination the
/// coordinate transformations need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassTriple<S: Real> {
    pub m1: S,
    pub m2: S,
    pub m3: S,
    /// Total mass.
    pub mu1: S,
    /// Reduced mass of the pair (2,3).
    pub mu2: S,
    /// Reduced mass of body 1 against the pair.
    pub mu3: S,
    /// Effective one-particle mass, `sqrt(m1 m2 m3 / mu1) = sqrt(mu2 mu3)`.
    pub mu0: S,
    /// `mu2 / m2`: weight of `R` in the displacement of body 2 from the pair center.
    pub lambda_minus: S,
    /// `mu2 / m3`: weight of `R` in the displacement of body 3 from the pair center.
    pub lambda_plus: S,
}

impl<S: Real> MassTriple<S> {
    pub fn new(m1: S, m2: S, m3: S) -> Result<Self> {
        for m in [m1, m2, m3] {
            if !(m > S::zero()) || !m.is_finite_scalar() {
                return Err(Error::NonPositiveMass(m.to_f64()));
            }
        }
        let mu1 = m1 + m2 + m3;
        let mu2 = m2 * m3 / (m2 + m3);
        let mu3 = m1 * (m2 + m3) / mu1;
        let mu0 = (m1 * m2 * m3 / mu1).sqrt();
        Ok(Self {
            m1,
            m2,
            m3,
            mu1,
            mu2,
            mu3,
            mu0,
            lambda_minus: mu2 / m2,
            lambda_plus: mu2 / m3,
        })
    }

    /// Factor taking the physical `r` to its mass-scaled version.
    pub fn scale_r(&self) -> S {
        (self.mu3 / self.mu0).sqrt()
    }

    /// Factor taking the physical `R` to its mass-scaled version.
    pub fn scale_big_r(&self) -> S {
        (self.mu2 / self.mu0).sqrt()
    }
}

/// Positions and momenta of the three bodies in the laboratory frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabState<S: Real> {
    pub r: [Vector3<S>; 3],
    pub p: [Vector3<S>; 3],
}

impl<S: Real> LabState<S> {
    pub fn new(r: [Vector3<S>; 3], p: [Vector3<S>; 3]) -> Result<Self> {
        let s = Self { r, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let d = (self.r[i] - self.r[j]).norm();
            if !(d > S::zero()) {
                return Err(Error::CoincidentBodies(d.to_f64()));
            }
        }
        Ok(())
    }
}

/// Relative state in Jacobi vectors: physical `r`, `R` and the
/// mass-normalized conjugate momenta `p_r = sqrt(mu0 mu3) dr/dt`,
/// `p_big_r = sqrt(mu0 mu2) dR/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiState<S: Real> {
    pub r: Vector3<S>,
    pub big_r: Vector3<S>,
    pub p_r: Vector3<S>,
    pub p_big_r: Vector3<S>,
}

impl<S: Real> JacobiState<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.big_r.norm() > S::zero()) {
            return Err(Error::CoincidentBodies(self.big_r.norm().to_f64()));
        }
        Ok(())
    }
}

/// Shape and orientation of the body triangle: mass-scaled lengths `r`, `R`,
/// the pair angle `theta`, and the z-x-z Euler angles of the body frame.
/// `r0` is the length scale that turns angles into coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypersphericalState<S: Real> {
    pub r: S,
    pub big_r: S,
    pub theta: S,
    pub cap_theta: S,
    pub cap_phi: S,
    pub cap_psi: S,
    pub r0: S,
}

impl<S: Real> HypersphericalState<S> {
    pub fn new(r: S, big_r: S, theta: S, cap_theta: S, cap_phi: S, cap_psi: S, r0: S) -> Result<Self> {
        let s = Self { r, big_r, theta, cap_theta, cap_phi, cap_psi, r0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let pi = S::pi();
        if !(self.r > S::zero() && self.big_r > S::zero() && self.r0 > S::zero()) {
            return Err(Error::Degenerate("hyperspherical lengths must be positive".into()));
        }
        if self.theta < S::zero() || self.theta > pi {
            return Err(Error::Degenerate("theta outside [0, pi]".into()));
        }
        if self.cap_theta <= -pi || self.cap_theta > pi || self.cap_phi <= -pi || self.cap_phi > pi {
            return Err(Error::Degenerate("Theta/Phi outside (-pi, pi]".into()));
        }
        if self.cap_psi < S::zero() || self.cap_psi > pi {
            return Err(Error::Degenerate("Psi outside [0, pi]".into()));
        }
        Ok(())
    }

    /// Coordinate vector `(r, R, r0*theta, r0*Theta, r0*Phi, r0*Psi)`.
    pub fn rho(&self) -> [S; 6] {
        [
            self.r,
            self.big_r,
            self.r0 * self.theta,
            self.r0 * self.cap_theta,
            self.r0 * self.cap_phi,
            self.r0 * self.cap_psi,
        ]
    }
}

/// Derives every mass combination from the three body masses.
pub fn derive_masses<S: Real>(m1: S, m2: S, m3: S) -> Result<MassTriple<S>> {
    MassTriple::new(m1, m2, m3)
}

/// Reduces a laboratory state to Jacobi vectors. Returns the state together
/// with the total momentum (which the reduction discards).
pub fn lab_to_jacobi<S: Real>(
    state: &LabState<S>,
    masses: &MassTriple<S>,
) -> Result<(JacobiState<S>, Vector3<S>)> {
    state.validate()?;
    let [r1, r2, r3] = state.r;
    let [p1, p2, p3] = state.p;
    let m = masses;

    let total_p = p1 + p2 + p3;
    let pair_center = (r2 * m.m2 + r3 * m.m3) / (m.m2 + m.m3);
    let big_r = r2 - r3;
    let r = r1 - pair_center;

    // Relative velocities are invariant under center-of-mass boosts.
    let big_r_dot = p2 / m.m2 - p3 / m.m3;
    let r_dot = p1 / m.m1 - (p2 + p3) / (m.m2 + m.m3);

    let j = JacobiState {
        r,
        big_r,
        p_r: r_dot * (m.mu0 * m.mu3).sqrt(),
        p_big_r: big_r_dot * (m.mu0 * m.mu2).sqrt(),
    };
    j.validate()?;
    Ok((j, total_p))
}

/// Rebuilds a laboratory state from Jacobi vectors, placing the total center
/// of mass at `cm_pos` with total momentum `cm_mom`.
pub fn jacobi_to_lab<S: Real>(
    j: &JacobiState<S>,
    masses: &MassTriple<S>,
    cm_pos: Vector3<S>,
    cm_mom: Vector3<S>,
) -> Result<LabState<S>> {
    j.validate()?;
    let m = masses;
    let pair_center = cm_pos - j.r * (m.m1 / m.mu1);
    let r1 = j.r + pair_center;
    let r2 = pair_center + j.big_r * m.lambda_minus;
    let r3 = pair_center - j.big_r * m.lambda_plus;

    let r_dot = j.p_r / (m.mu0 * m.mu3).sqrt();
    let big_r_dot = j.p_big_r / (m.mu0 * m.mu2).sqrt();
    let v_cm = cm_mom / m.mu1;
    let v_pair = v_cm - r_dot * (m.m1 / m.mu1);
    let v1 = r_dot + v_pair;
    let v2 = v_pair + big_r_dot * m.lambda_minus;
    let v3 = v_pair - big_r_dot * m.lambda_plus;

    LabState::new(
        [r1, r2, r3],
        [v1 * m.m1, v2 * m.m2, v3 * m.m3],
    )
}

/// Mass-scaled one-particle vectors for a Jacobi state.
pub fn scaled_vectors<S: Real>(j: &JacobiState<S>, masses: &MassTriple<S>) -> (Vector3<S>, Vector3<S>) {
    (j.r * masses.scale_r(), j.big_r * masses.scale_big_r())
}

/// Shape/orientation coordinates of a pair of (mass-scaled) vectors.
///
/// Collinear pairs are accepted with `theta` at 0 or pi and an arbitrary but
/// deterministic in-plane axis; a vanishing `q_R` is an error.
pub fn vectors_to_hyperspherical<S: Real>(
    q_r: Vector3<S>,
    q_big_r: Vector3<S>,
    r0: S,
) -> Result<HypersphericalState<S>> {
    let r = q_r.norm();
    let big_r = q_big_r.norm();
    if !(r > S::zero()) || !(big_r > S::zero()) {
        return Err(Error::Degenerate("vanishing Jacobi vector".into()));
    }
    let z_b = q_big_r / big_r;
    let cos_theta = q_r.dot(&z_b) / r;
    let cos_theta = cos_theta.clamp(-S::one(), S::one());
    let theta = cos_theta.acos();

    let perp = q_r - z_b * q_r.dot(&z_b);
    let perp_norm = perp.norm();
    let x_b = if perp_norm > r * S::lit(1e-14) {
        perp / perp_norm
    } else {
        // Collinear: any unit vector orthogonal to z_b completes the frame.
        let trial = if z_b.x.abs() < S::lit(0.9) {
            Vector3::new(S::one(), S::zero(), S::zero())
        } else {
            Vector3::new(S::zero(), S::one(), S::zero())
        };
        let p = trial - z_b * trial.dot(&z_b);
        p / p.norm()
    };
    let y_b = z_b.cross(&x_b);

    // Body-to-lab rotation with columns (x_b, y_b, z_b); extract z-x-z angles
    // in the ranges Theta, Phi in (-pi, pi], Psi in [0, pi]. Entry A[i][j] of
    // Rz(Phi) Rx(Theta) Rz(Psi): A[2][0] = sTh sPs, A[2][1] = sTh cPs,
    // A[2][2] = cTh, A[0][2] = sPh sTh, A[1][2] = -cPh sTh.
    let a_20 = x_b.z;
    let a_21 = y_b.z;
    let a_22 = z_b.z;
    let a_02 = z_b.x;
    let a_12 = z_b.y;

    let sin_cap_theta = (S::one() - a_22 * a_22).max(S::zero()).sqrt();
    let (cap_theta, cap_phi, cap_psi) = if sin_cap_theta < S::lit(1e-14) {
        // Body z parallel to lab z: only the combination Phi +/- Psi is
        // determined. Put the whole rotation into Phi.
        let phi = x_b.y.atan2(x_b.x);
        let theta0 = if a_22 > S::zero() { S::zero() } else { S::pi() };
        (theta0, wrap_signed(phi), S::zero())
    } else {
        let theta0 = a_22.clamp(-S::one(), S::one()).acos();
        let psi0 = a_20.atan2(a_21);
        let phi0 = a_02.atan2(-a_12);
        if psi0 >= S::zero() {
            (theta0, phi0, psi0)
        } else {
            // Rz(Ph) Rx(Th) Rz(Ps) = Rz(Ph+pi) Rx(-Th) Rz(Ps+pi): fold Psi
            // into [0, pi] at the cost of a signed Theta.
            (-theta0, wrap_signed(phi0 + S::pi()), psi0 + S::pi())
        }
    };

    HypersphericalState::new(r, big_r, theta, cap_theta, cap_phi, cap_psi, r0)
}

/// Shape/orientation coordinates of a Jacobi state (mass-scaled internally).
pub fn jacobi_to_hyperspherical<S: Real>(
    j: &JacobiState<S>,
    masses: &MassTriple<S>,
    r0: S,
) -> Result<HypersphericalState<S>> {
    let (q_r, q_big_r) = scaled_vectors(j, masses);
    vectors_to_hyperspherical(q_r, q_big_r, r0)
}

/// Mass-scaled vectors of a hyperspherical state, in the laboratory frame.
pub fn hyperspherical_to_vectors<S: Real>(h: &HypersphericalState<S>) -> (Vector3<S>, Vector3<S>) {
    let a = euler_rotation(h.cap_phi, h.cap_theta, h.cap_psi);
    let gamma_body = Vector3::new(h.theta.sin(), S::zero(), h.theta.cos());
    let q_r = a * (gamma_body * h.r);
    let q_big_r = a * Vector3::new(S::zero(), S::zero(), h.big_r);
    (q_r, q_big_r)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_signed<S: Real>(angle: S) -> S {
    let two_pi = S::two_pi();
    angle - two_pi * ((angle - S::pi()) / two_pi).ceil()
}
