//! Metric tensor of the rotating-triangle coordinates and the kinetic-energy
//! identities that validate it.
//!
//! The 6x6 tensor is block diagonal between the shape coordinates
//! `(r, R, r0*theta)` and the orientation coordinates `r0*(Theta, Phi, Psi)`.
//! The block form discards the shape-rotation coupling `2 r^2 theta_dot w_y`
//! that the exact Cartesian kinetic energy carries; `coriolis_coupling`
//! exposes that term so the discrepancy stays measurable.

use super::HypersphericalState;
use crate::scalar::Real;
use nalgebra::{Matrix3, Matrix6, Vector3};

/// Independent components of the symmetric 6x6 coordinate metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMetric<S: Real> {
    pub g11: S,
    pub g22: S,
    pub g33: S,
    pub g44: S,
    pub g55: S,
    pub g66: S,
    pub g45: S,
    pub g46: S,
    pub g56: S,
}

impl<S: Real> GammaMetric<S> {
    /// Full symmetric matrix.
    pub fn matrix(&self) -> Matrix6<S> {
        let z = S::zero();
        Matrix6::from_row_slice(&[
            self.g11, z, z, z, z, z,
            z, self.g22, z, z, z, z,
            z, z, self.g33, z, z, z,
            z, z, z, self.g44, self.g45, self.g46,
            z, z, z, self.g45, self.g55, self.g56,
            z, z, z, self.g46, self.g56, self.g66,
        ])
    }

    /// Diagonal of the shape block `(1, 1, (r/r0)^2)`.
    pub fn internal_diag(&self) -> [S; 3] {
        [self.g11, self.g22, self.g33]
    }

    /// Orientation 3x3 block.
    pub fn external_block(&self) -> Matrix3<S> {
        Matrix3::new(
            self.g44, self.g45, self.g46,
            self.g45, self.g55, self.g56,
            self.g46, self.g56, self.g66,
        )
    }

    /// Quadratic form on a coordinate-rate vector.
    pub fn quadratic(&self, d: &[S; 6]) -> S {
        let two = S::two();
        self.g11 * d[0] * d[0]
            + self.g22 * d[1] * d[1]
            + self.g33 * d[2] * d[2]
            + self.g44 * d[3] * d[3]
            + self.g55 * d[4] * d[4]
            + self.g66 * d[5] * d[5]
            + two * (self.g45 * d[3] * d[4] + self.g46 * d[3] * d[5] + self.g56 * d[4] * d[5])
    }
}

/// Metric components at a hyperspherical point.
pub fn gamma_metric<S: Real>(h: &HypersphericalState<S>) -> GammaMetric<S> {
    let one = S::one();
    let half = S::half();
    let two = S::two();
    let x = h.r / h.r0;
    let y = h.big_r / h.r0;
    let x2 = x * x;
    let y2 = y * y;
    let (s_th, c_th) = (h.theta.sin(), h.theta.cos());
    let (s_ct, c_ct) = (h.cap_theta.sin(), h.cap_theta.cos());
    let (s_ps, c_ps) = (h.cap_psi.sin(), h.cap_psi.cos());
    let s2_th = two * s_th * c_th; // sin(2 theta)
    let s2_ct = two * s_ct * c_ct; // sin(2 Theta)
    let s2_ps = two * s_ps * c_ps; // sin(2 Psi)

    GammaMetric {
        g11: one,
        g22: one,
        g33: x2,
        g44: y2 + x2 * (one - s_th * s_th * c_ps * c_ps),
        g55: y2 * s_ct * s_ct
            + x2 * (s_ct * s_ct * c_ps * c_ps
                + c_th * c_th * s_ct * s_ct * s_ps * s_ps
                + s_th * s_th * c_ct * c_ct
                - half * s2_th * s2_ct * s_ps),
        g66: x2 * s_th * s_th,
        g45: -half * x2 * (s_th * s_th * s_ct * s2_ps + s2_th * c_ct * c_ps),
        g46: -half * x2 * s2_th * c_ps,
        g56: half * x2 * (two * s_th * s_th * c_ct - s2_th * s_ct * s_ps),
    }
}

/// Rates of the hyperspherical state with respect to ordinary time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HypersphericalRates<S: Real> {
    pub r_dot: S,
    pub big_r_dot: S,
    pub theta_dot: S,
    pub cap_theta_dot: S,
    pub cap_phi_dot: S,
    pub cap_psi_dot: S,
}

impl<S: Real> HypersphericalRates<S> {
    /// Coordinate rates `(dr, dR, r0 dtheta, r0 dTheta, r0 dPhi, r0 dPsi)`.
    pub fn rho_rates(&self, r0: S) -> [S; 6] {
        [
            self.r_dot,
            self.big_r_dot,
            r0 * self.theta_dot,
            r0 * self.cap_theta_dot,
            r0 * self.cap_phi_dot,
            r0 * self.cap_psi_dot,
        ]
    }
}

/// Body-to-lab rotation `Rz(Phi) Rx(Theta) Rz(Psi)`.
pub fn euler_rotation<S: Real>(cap_phi: S, cap_theta: S, cap_psi: S) -> Matrix3<S> {
    let (s1, c1) = (cap_phi.sin(), cap_phi.cos());
    let (s2, c2) = (cap_theta.sin(), cap_theta.cos());
    let (s3, c3) = (cap_psi.sin(), cap_psi.cos());
    Matrix3::new(
        c1 * c3 - s1 * c2 * s3, -c1 * s3 - s1 * c2 * c3, s1 * s2,
        s1 * c3 + c1 * c2 * s3, -s1 * s3 + c1 * c2 * c3, -c1 * s2,
        s2 * s3, s2 * c3, c2,
    )
}

/// Body-frame angular velocity of the z-x-z Euler rotation.
pub fn body_angular_velocity<S: Real>(
    h: &HypersphericalState<S>,
    rates: &HypersphericalRates<S>,
) -> Vector3<S> {
    let (s_ct, c_ct) = (h.cap_theta.sin(), h.cap_theta.cos());
    let (s_ps, c_ps) = (h.cap_psi.sin(), h.cap_psi.cos());
    let dph = rates.cap_phi_dot;
    let dth = rates.cap_theta_dot;
    let dps = rates.cap_psi_dot;
    Vector3::new(
        dph * s_ct * s_ps + dth * c_ps,
        dph * s_ct * c_ps - dth * s_ps,
        dph * c_ct + dps,
    )
}

/// Kinetic energy in tensor form, `(mu0/2) gamma(rho_dot, rho_dot)`.
pub fn kinetic_energy<S: Real>(
    h: &HypersphericalState<S>,
    rates: &HypersphericalRates<S>,
    mu0: S,
) -> S {
    let g = gamma_metric(h);
    mu0 * S::half() * g.quadratic(&rates.rho_rates(h.r0))
}

/// Kinetic energy assembled from the angular-velocity expansion:
/// `(mu0/2) (dR^2 + dr^2 + r^2 dtheta^2 + A R^2 + B r^2)` with
/// `A = w_x^2 + w_y^2`, `B = w_y^2 + (w_x cos(theta) - w_z sin(theta))^2`.
pub fn kinetic_energy_angular<S: Real>(
    h: &HypersphericalState<S>,
    rates: &HypersphericalRates<S>,
    mu0: S,
) -> S {
    let w = body_angular_velocity(h, rates);
    let (s_th, c_th) = (h.theta.sin(), h.theta.cos());
    let a = w.x * w.x + w.y * w.y;
    let b = w.y * w.y + (w.x * c_th - w.z * s_th) * (w.x * c_th - w.z * s_th);
    mu0 * S::half()
        * (rates.big_r_dot * rates.big_r_dot
            + rates.r_dot * rates.r_dot
            + h.r * h.r * rates.theta_dot * rates.theta_dot
            + a * h.big_r * h.big_r
            + b * h.r * h.r)
}

/// Exact Cartesian kinetic energy `(mu0/2)(|dq_R/dt|^2 + |dq_r/dt|^2)` from
/// the reconstructed vector rates. Unlike the tensor form, this retains the
/// shape-rotation coupling.
pub fn kinetic_energy_cartesian<S: Real>(
    h: &HypersphericalState<S>,
    rates: &HypersphericalRates<S>,
    mu0: S,
) -> S {
    let w = body_angular_velocity(h, rates);
    let (s_th, c_th) = (h.theta.sin(), h.theta.cos());
    // Body-frame vectors: q_R = R e_z, q_r = r (sin th, 0, cos th).
    let q_big_r = Vector3::new(S::zero(), S::zero(), h.big_r);
    let gamma_dir = Vector3::new(s_th, S::zero(), c_th);
    let gamma_prime = Vector3::new(c_th, S::zero(), -s_th);
    let v_big_r = Vector3::new(S::zero(), S::zero(), rates.big_r_dot) + w.cross(&q_big_r);
    let v_r = gamma_dir * rates.r_dot + gamma_prime * (h.r * rates.theta_dot) + w.cross(&(gamma_dir * h.r));
    mu0 * S::half() * (v_big_r.norm_squared() + v_r.norm_squared())
}

/// The shape-rotation cross term `mu0 r^2 theta_dot w_y` dropped by the
/// block-diagonal tensor: `kinetic_energy_cartesian = kinetic_energy + this`.
pub fn coriolis_coupling<S: Real>(
    h: &HypersphericalState<S>,
    rates: &HypersphericalRates<S>,
    mu0: S,
) -> S {
    let w = body_angular_velocity(h, rates);
    mu0 * h.r * h.r * rates.theta_dot * w.y
}
