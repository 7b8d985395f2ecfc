//! The immutable problem statement: masses, potential, total energy, length
//! scale, angular-momentum integrals, and the conformal-factor normalization.

use crate::error::Error;
use crate::kinematics::potential::PotentialSpec;
use crate::kinematics::MassTriple;
use crate::Result;

/// Everything a run needs to know about the physical system.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub masses: MassTriple<f64>,
    pub potential: PotentialSpec,
    /// Total energy of the reduced system.
    pub energy: f64,
    /// Length scale multiplying angle coordinates (mass-scaled units).
    pub r0: f64,
    /// First integrals of the orientation equations.
    pub j_integrals: [f64; 3],
    /// Normalization of the conformal factor, `max |V|` over the declared box
    /// or an explicit override.
    pub u0: f64,
}

impl SystemSpec {
    pub fn new(
        masses: MassTriple<f64>,
        potential: PotentialSpec,
        energy: f64,
        r0: f64,
        j_integrals: [f64; 3],
        u0: f64,
    ) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::InvalidArgument(format!("r0 must be positive, got {r0}")));
        }
        if !(u0 > 0.0) {
            return Err(Error::InvalidArgument(format!("u0 must be positive, got {u0}")));
        }
        Ok(Self { masses, potential, energy, r0, j_integrals, u0 })
    }

    /// Norm of the angular integrals.
    pub fn j_total(&self) -> f64 {
        let [a, b, c] = self.j_integrals;
        (a * a + b * b + c * c).sqrt()
    }

    /// Conserved value of the reduced Hamiltonian along geodesics. The
    /// reduced Hamiltonian is nonnegative, so the energy itself can serve as
    /// the shell value only when positive; bound systems fall back to the
    /// unit-speed normalization 1/2.
    pub fn energy_shell(&self) -> f64 {
        if self.energy > 0.0 {
            self.energy
        } else {
            0.5
        }
    }

    /// Total potential at internal coordinates `(rho1, rho2, rho3)` =
    /// `(r, R, r0 theta)` in mass-scaled units.
    pub fn potential_internal(&self, rho: &[f64; 3]) -> f64 {
        self.potential
            .v_internal(&self.masses, rho[0], rho[1], rho[2] / self.r0)
    }

    /// Conformal factor `(E - V)/u0`; errors on the turning surface and in
    /// the forbidden region.
    pub fn conformal_factor(&self, rho: &[f64; 3]) -> Result<f64> {
        let margin = self.energy - self.potential_internal(rho);
        let scale = self.energy.abs().max(self.u0);
        if margin <= scale * 1e-14 {
            if margin > -scale * 1e-10 {
                return Err(Error::TurningSurface { e_minus_u: margin });
            }
            return Err(Error::ForbiddenRegion(margin));
        }
        Ok(margin / self.u0)
    }

    /// Gradient of the conformal factor with respect to the internal
    /// coordinates.
    pub fn conformal_gradient(&self, rho: &[f64; 3]) -> [f64; 3] {
        let g = self
            .potential
            .v_internal_gradient(&self.masses, rho[0], rho[1], rho[2] / self.r0);
        [-g[0] / self.u0, -g[1] / self.u0, -g[2] / (self.u0 * self.r0)]
    }

    /// Log-gradient coefficients over the internal coordinates:
    /// `pi_i = -(1/2) d ln g / d rho_i`.
    pub fn pi_coefficients(&self, rho: &[f64; 3]) -> Result<[f64; 3]> {
        let g = self.conformal_factor(rho)?;
        let dg = self.conformal_gradient(rho);
        Ok([-0.5 * dg[0] / g, -0.5 * dg[1] / g, -0.5 * dg[2] / g])
    }

    /// Hessian of the conformal factor (central differences of the analytic
    /// gradient).
    pub fn conformal_hessian(&self, rho: &[f64; 3]) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for k in 0..3 {
            let step = 1e-6 * rho[k].abs().max(1.0);
            let mut rp = *rho;
            let mut rm = *rho;
            rp[k] += step;
            rm[k] -= step;
            let gp = self.conformal_gradient(&rp);
            let gm = self.conformal_gradient(&rm);
            for i in 0..3 {
                h[i][k] = (gp[i] - gm[i]) / (2.0 * step);
            }
        }
        // Symmetrize the finite-difference noise away.
        for i in 0..3 {
            for k in (i + 1)..3 {
                let v = 0.5 * (h[i][k] + h[k][i]);
                h[i][k] = v;
                h[k][i] = v;
            }
        }
        h
    }
}
