//! Constructive solutions of the underdetermined algebraic systems linking
//! the local-chart differentials to the hyperspherical ones.
//!
//! The shape-block conditions demand that the three coefficient columns
//! `(alpha_m, beta_m, gamma_m)` be orthogonal with squared length `g` under
//! the weight `diag(1, 1, g33)`; the orientation-block conditions do the same
//! under the full orientation metric block. Both are solved exactly by
//! scaling an orthogonal gauge matrix, so residuals are at rounding level by
//! construction and the leftover freedom is exactly the orthogonal-group
//! gauge.

use crate::error::Error;
use crate::scalar::Real;
use crate::Result;
use nalgebra::{Matrix3, Vector3};

/// Absolute residual tolerance the shape-frame construction must meet.
pub const INTERNAL_RESIDUAL_TOL: f64 = 1e-12;
/// Absolute residual tolerance for the orientation-frame construction.
pub const EXTERNAL_RESIDUAL_TOL: f64 = 1e-10;

fn orthogonality_defect<S: Real>(o: &Matrix3<S>) -> S {
    let d = o.transpose() * o - Matrix3::identity();
    d.iter().fold(S::zero(), |m, v| m.max(v.abs()))
}

/// Direct-map coefficients of the shape block: rows `alpha`, `beta`, `gamma`
/// give `d rho_1 = alpha . dx`, `d rho_2 = beta . dx`, `d rho_3 = gamma . dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSolution<S: Real> {
    pub alpha: [S; 3],
    pub beta: [S; 3],
    pub gamma: [S; 3],
    /// Orthogonal gauge parameter the solution was built from.
    pub gauge: Matrix3<S>,
    /// Conformal factor the quadratic conditions were solved against.
    pub g: S,
    /// Shape-metric weight `(r/r0)^2` of the third coordinate.
    pub gamma33: S,
    /// Max absolute violation of the six quadratic conditions.
    pub residual: S,
}

impl<S: Real> FrameSolution<S> {
    /// Solves the shape-block system for conformal factor `g` and coordinate
    /// weight `gamma33`, using the orthogonal `gauge`.
    pub fn solve(g: S, gamma33: S, gauge: &Matrix3<S>) -> Result<Self> {
        if !(g > S::zero()) {
            return Err(Error::FrameDegenerate(format!(
                "conformal factor must be positive, got {}",
                g.to_f64()
            )));
        }
        if !(gamma33 > S::zero()) {
            return Err(Error::FrameDegenerate(
                "shape weight gamma33 vanishes (r = 0)".into(),
            ));
        }
        let defect = orthogonality_defect(gauge);
        if defect.to_f64() > 1e-10 {
            return Err(Error::FrameDegenerate(format!(
                "gauge matrix is not orthogonal (defect {:.3e})",
                defect.to_f64()
            )));
        }
        let sq = g.sqrt();
        let w3 = sq / gamma33.sqrt();
        let alpha = [sq * gauge[(0, 0)], sq * gauge[(0, 1)], sq * gauge[(0, 2)]];
        let beta = [sq * gauge[(1, 0)], sq * gauge[(1, 1)], sq * gauge[(1, 2)]];
        let gamma = [w3 * gauge[(2, 0)], w3 * gauge[(2, 1)], w3 * gauge[(2, 2)]];
        let mut sol = Self { alpha, beta, gamma, gauge: *gauge, g, gamma33, residual: S::zero() };
        let residual = sol.max_condition_residual();
        sol.residual = residual;
        if residual.to_f64() > INTERNAL_RESIDUAL_TOL * g.to_f64().max(1.0) {
            return Err(Error::FrameResidual {
                residual: residual.to_f64(),
                tol: INTERNAL_RESIDUAL_TOL,
            });
        }
        Ok(sol)
    }

    /// Raw constructor (no quadratic conditions enforced); for probing the
    /// normalized form outside its domain.
    pub fn from_rows(alpha: [S; 3], beta: [S; 3], gamma: [S; 3], g: S, gamma33: S) -> Self {
        let mut sol = Self {
            alpha,
            beta,
            gamma,
            gauge: Matrix3::identity(),
            g,
            gamma33,
            residual: S::zero(),
        };
        sol.residual = sol.max_condition_residual();
        sol
    }

    /// Max violation over the six quadratic conditions
    /// `alpha_m alpha_n + beta_m beta_n + gamma33 gamma_m gamma_n = g delta_mn`.
    pub fn max_condition_residual(&self) -> S {
        let mut worst = S::zero();
        for m in 0..3 {
            for n in m..3 {
                let lhs = self.alpha[m] * self.alpha[n]
                    + self.beta[m] * self.beta[n]
                    + self.gamma33 * self.gamma[m] * self.gamma[n];
                let rhs = if m == n { self.g } else { S::zero() };
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst
    }

    /// The coefficient matrix as a linear map `dx -> d rho` (rows are
    /// `alpha`, `beta`, `gamma`).
    pub fn matrix(&self) -> Matrix3<S> {
        Matrix3::new(
            self.alpha[0], self.alpha[1], self.alpha[2],
            self.beta[0], self.beta[1], self.beta[2],
            self.gamma[0], self.gamma[1], self.gamma[2],
        )
    }

    /// Shape-coordinate increment produced by a local-chart increment.
    pub fn differential_map(&self, dx: &Vector3<S>) -> Vector3<S> {
        self.matrix() * dx
    }

    /// Log-gradient coefficients in the local chart from their
    /// shape-coordinate counterparts: `a_j = sum_n pi_n  d rho_n / d x^j`.
    pub fn pullback_gradient(&self, pi: &[S; 3]) -> [S; 3] {
        let mut a = [S::zero(); 3];
        for j in 0..3 {
            a[j] = pi[0] * self.alpha[j] + pi[1] * self.beta[j] + pi[2] * self.gamma[j];
        }
        a
    }

    /// Squared shape-metric length of the image of `dx` minus `g |dx|^2`
    /// (the line-element identity, zero up to rounding).
    pub fn line_element_residual(&self, dx: &Vector3<S>) -> S {
        let drho = self.differential_map(dx);
        let image = drho[0] * drho[0] + drho[1] * drho[1] + self.gamma33 * drho[2] * drho[2];
        image - self.g * dx.norm_squared()
    }

    /// Inverse coefficients (the matrix inverse, in closed form through the
    /// gauge factorization).
    pub fn inverse(&self) -> InverseFrameSolution<S> {
        // P = sqrt(g) diag(1, 1, 1/sqrt(g33)) O  =>
        // P^-1 = (1/sqrt(g)) O^T diag(1, 1, sqrt(g33)).
        let inv_sq = S::one() / self.g.sqrt();
        let w3 = self.gamma33.sqrt();
        let ot = self.gauge.transpose();
        let scale = Matrix3::from_diagonal(&Vector3::new(S::one(), S::one(), w3));
        let q = ot * scale * inv_sq;
        InverseFrameSolution::from_matrix(q, self.g, self.gamma33)
    }
}

/// Inverse-map coefficients: rows give `dx^1 = row0 . d rho`, etc.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseFrameSolution<S: Real> {
    pub rows: Matrix3<S>,
    pub g: S,
    pub gamma33: S,
    /// Max violation of the inverse quadratic conditions
    /// (column Gram matrix equals `diag(1, 1, gamma33)/g`).
    pub residual: S,
}

impl<S: Real> InverseFrameSolution<S> {
    pub fn from_matrix(rows: Matrix3<S>, g: S, gamma33: S) -> Self {
        let gram = rows.transpose() * rows;
        let mut worst = S::zero();
        let target = [S::one() / g, S::one() / g, gamma33 / g];
        for m in 0..3 {
            for n in m..3 {
                let rhs = if m == n { target[m] } else { S::zero() };
                worst = worst.max((gram[(m, n)] - rhs).abs());
            }
        }
        Self { rows, g, gamma33, residual: worst }
    }

    /// Deviation of `inverse * direct` from the identity.
    pub fn composition_defect(&self, direct: &FrameSolution<S>) -> S {
        let prod = self.rows * direct.matrix() - Matrix3::identity();
        prod.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }
}

/// Direct-map coefficients of the orientation block: rows `u`, `v`, `w` give
/// the orientation-coordinate increments of the three local directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalFrameSolution<S: Real> {
    pub u: [S; 3],
    pub v: [S; 3],
    pub w: [S; 3],
    pub g: S,
    /// Max violation of the six quadratic-form conditions against the
    /// orientation metric block.
    pub residual: S,
}

impl<S: Real> ExternalFrameSolution<S> {
    /// Solves the orientation-block system against the positive-definite
    /// metric block `ext` via its Cholesky factor: columns
    /// `c_m = sqrt(g) L^-T o_m` satisfy `c_m^T ext c_n = g delta_mn`.
    pub fn solve(g: S, ext: &Matrix3<S>, gauge: &Matrix3<S>) -> Result<Self> {
        if !(g > S::zero()) {
            return Err(Error::FrameDegenerate("conformal factor must be positive".into()));
        }
        let defect = orthogonality_defect(gauge);
        if defect.to_f64() > 1e-10 {
            return Err(Error::FrameDegenerate(format!(
                "gauge matrix is not orthogonal (defect {:.3e})",
                defect.to_f64()
            )));
        }
        let chol = nalgebra::Cholesky::new(*ext).ok_or_else(|| {
            Error::FrameDegenerate(
                "orientation metric block is not positive definite (degenerate orientation)".into(),
            )
        })?;
        let lt = chol.l().transpose();
        let rhs = gauge * g.sqrt();
        let c = lt
            .try_inverse()
            .ok_or_else(|| Error::FrameDegenerate("orientation factor is singular".into()))?
            * rhs;
        let mut sol = Self {
            u: [c[(0, 0)], c[(0, 1)], c[(0, 2)]],
            v: [c[(1, 0)], c[(1, 1)], c[(1, 2)]],
            w: [c[(2, 0)], c[(2, 1)], c[(2, 2)]],
            g,
            residual: S::zero(),
        };
        sol.residual = sol.max_condition_residual(ext);
        if sol.residual.to_f64() > EXTERNAL_RESIDUAL_TOL * g.to_f64().max(1.0) {
            return Err(Error::FrameResidual {
                residual: sol.residual.to_f64(),
                tol: EXTERNAL_RESIDUAL_TOL,
            });
        }
        Ok(sol)
    }

    pub fn matrix(&self) -> Matrix3<S> {
        Matrix3::new(
            self.u[0], self.u[1], self.u[2],
            self.v[0], self.v[1], self.v[2],
            self.w[0], self.w[1], self.w[2],
        )
    }

    /// Max violation of `c_m^T ext c_n = g delta_mn` over the six conditions.
    pub fn max_condition_residual(&self, ext: &Matrix3<S>) -> S {
        let c = self.matrix();
        let gram = c.transpose() * ext * c;
        let mut worst = S::zero();
        for m in 0..3 {
            for n in m..3 {
                let rhs = if m == n { self.g } else { S::zero() };
                worst = worst.max((gram[(m, n)] - rhs).abs());
            }
        }
        worst
    }

    /// Orientation-coordinate increment produced by the orientation
    /// local-chart increment.
    pub fn differential_map(&self, dx_ext: &Vector3<S>) -> Vector3<S> {
        self.matrix() * dx_ext
    }
}

/// The normalized-triple change of variables: three quadruples of unit
/// Euclidean norm wherever the `sigma` denominators are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereForm<S: Real> {
    pub sigma: [S; 3],
    /// Quadruples `(alpha~, beta~, gamma~, paired gamma~)`, one per cyclic
    /// pair of columns.
    pub quads: [[S; 4]; 3],
}

/// Normalized triples of a shape-frame solution. Errors when a `sigma`
/// denominator is not positive (outside the normal form's domain).
pub fn sphere_form<S: Real>(frame: &FrameSolution<S>) -> Result<SphereForm<S>> {
    let g = frame.g;
    let g33 = frame.gamma33;
    let ga = frame.gamma;
    let two = S::two();
    let sigma = [
        two * (g - g33 * ga[0] * ga[1]),
        two * (g - g33 * ga[1] * ga[2]),
        two * (g - g33 * ga[2] * ga[0]),
    ];
    for (i, s) in sigma.iter().enumerate() {
        if !(*s > S::zero()) {
            return Err(Error::SigmaDomain { index: i + 1, value: s.to_f64() });
        }
    }
    let sq33 = g33.sqrt();
    let mut quads = [[S::zero(); 4]; 3];
    // Cyclic pairs (1,2), (2,3), (3,1) of the coefficient columns.
    let pairs = [(0usize, 1usize), (1, 2), (2, 0)];
    for (k, (i, j)) in pairs.into_iter().enumerate() {
        let den = sigma[k].sqrt();
        quads[k] = [
            (frame.alpha[i] + frame.alpha[j]) / den,
            (frame.beta[i] + frame.beta[j]) / den,
            sq33 * ga[i] / den,
            sq33 * ga[j] / den,
        ];
    }
    Ok(SphereForm { sigma, quads })
}

impl<S: Real> SphereForm<S> {
    /// Max deviation of the quadruple norms from one.
    pub fn unit_norm_residual(&self) -> S {
        let mut worst = S::zero();
        for q in &self.quads {
            let n = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
            worst = worst.max((n - S::one()).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    #[test]
    fn identity_gauge_frozen_values() {
        // g = 4, gamma33 = 0.25: alpha1 = beta2 = 2, gamma3 = sqrt(g/gamma33) = 4.
        let f = FrameSolution::solve(4.0, 0.25, &Matrix3::identity()).unwrap();
        assert_relative_eq!(f.alpha[0], 2.0);
        assert_relative_eq!(f.beta[1], 2.0);
        assert_relative_eq!(f.gamma[2], 4.0);
        assert_relative_eq!(f.gamma33 * f.gamma[2] * f.gamma[2], 4.0);
        assert!(f.residual <= 1e-12);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(FrameSolution::solve(4.0, 0.0, &Matrix3::identity()).is_err());
        assert!(FrameSolution::solve(-1.0, 0.2, &Matrix3::identity()).is_err());
        let skewed = Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(FrameSolution::solve(4.0, 0.2, &skewed).is_err());
    }

    #[test]
    fn identity_gauge_differential_map_is_diagonal() {
        let g: f64 = 2.5;
        let g33: f64 = 0.49;
        let f = FrameSolution::solve(g, g33, &Matrix3::identity()).unwrap();
        let drho = f.differential_map(&Vector3::new(1.0, 1.0, 1.0));
        assert_relative_eq!(drho[0], g.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(drho[1], g.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(drho[2], g.sqrt() / g33.sqrt(), max_relative = 1e-15);
        assert_eq!(f.differential_map(&Vector3::zeros()), Vector3::zeros());
    }

    #[test]
    fn inverse_reciprocal_structure_and_composition() {
        let g: f64 = 3.1;
        let g33 = 0.81;
        let f = FrameSolution::solve(g, g33, &Matrix3::identity()).unwrap();
        let inv = f.inverse();
        // Columns carry (1/g, 1/g, gamma33/g).
        let q = inv.rows;
        assert_relative_eq!(
            q[(0, 0)].powi(2) + q[(1, 0)].powi(2) + q[(2, 0)].powi(2),
            1.0 / g,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            q[(0, 2)].powi(2) + q[(1, 2)].powi(2) + q[(2, 2)].powi(2),
            g33 / g,
            max_relative = 1e-13
        );
        assert!(inv.residual <= 1e-12);
        assert!(inv.composition_defect(&f) <= 1e-13);
    }

    #[test]
    fn sphere_form_identity_gauge_frozen() {
        // g = 4, identity gauge: gamma1 = gamma2 = 0, sigma1 = 2 g = 8,
        // first quadruple = (2, 2, 0, 0)/sqrt(8): norm 1.
        let f = FrameSolution::solve(4.0, 0.25, &Matrix3::identity()).unwrap();
        let sf = sphere_form(&f).unwrap();
        assert_relative_eq!(sf.sigma[0], 8.0);
        assert_relative_eq!(sf.quads[0][0], 2.0 / 8.0f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(sf.quads[0][1], 2.0 / 8.0f64.sqrt(), max_relative = 1e-15);
        assert_eq!(sf.quads[0][2], 0.0);
        assert!(sf.unit_norm_residual() <= 1e-14);
    }

    #[test]
    fn sphere_form_domain_violation_detected() {
        // Raw rows violating the quadratic conditions can push sigma <= 0.
        let f = FrameSolution::from_rows(
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [3.0, 3.0, 0.0],
            1.0,
            1.0,
        );
        match sphere_form(&f) {
            Err(Error::SigmaDomain { index: 1, value }) => assert!(value <= 0.0),
            other => panic!("expected sigma-domain error, got {other:?}"),
        }
    }

    #[test]
    fn external_solve_decoupled_block() {
        // Diagonal orientation block: the conditions decouple componentwise.
        let g: f64 = 2.0;
        let ext = Matrix3::from_diagonal(&Vector3::new(4.0, 9.0, 1.0));
        let sol = ExternalFrameSolution::solve(g, &ext, &Matrix3::identity()).unwrap();
        assert_relative_eq!(sol.u[0], g.sqrt() / 2.0, max_relative = 1e-13);
        assert_relative_eq!(sol.v[1], g.sqrt() / 3.0, max_relative = 1e-13);
        assert_relative_eq!(sol.w[2], g.sqrt(), max_relative = 1e-13);
        assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn external_degenerate_block_rejected() {
        // Vanishing w-direction entry (collinear shape): not positive definite.
        let ext = Matrix3::from_diagonal(&Vector3::new(4.0, 9.0, 0.0));
        assert!(matches!(
            ExternalFrameSolution::solve(2.0, &ext, &Matrix3::identity()),
            Err(Error::FrameDegenerate(_))
        ));
    }

    #[test]
    fn gauge_freedom_spans_three_parameters() {
        // Perturbing the gauge along the three rotation generators produces
        // three independent frame perturbations: the solution family is (at
        // least) three-dimensional at every point.
        let g = 2.7;
        let g33 = 0.36;
        let base = FrameSolution::solve(g, g33, &Matrix3::identity()).unwrap();
        let eps = 1e-6;
        let mut dirs: Vec<nalgebra::DVector<f64>> = Vec::new();
        for axis in [Vector3::x_axis(), Vector3::y_axis(), Vector3::z_axis()] {
            let o = Rotation3::from_axis_angle(&axis, eps).into_inner();
            let f = FrameSolution::solve(g, g33, &o).unwrap();
            let d = (f.matrix() - base.matrix()) / eps;
            dirs.push(nalgebra::DVector::from_iterator(9, d.iter().cloned()));
        }
        let m = nalgebra::DMatrix::from_columns(&dirs);
        let svd = m.svd(false, false);
        let smax = svd.singular_values[0];
        let rank = svd.singular_values.iter().filter(|s| **s > 1e-6 * smax).count();
        assert_eq!(rank, 3);
    }

    proptest! {
        #[test]
        fn random_gauges_solve_exactly(
            g in 0.1f64..50.0,
            g33 in 0.01f64..25.0,
            ax in -1.0f64..1.0,
            ay in -1.0f64..1.0,
            az in -1.0f64..1.0,
        ) {
            let o = Rotation3::from_euler_angles(ax * 3.0, ay * 1.5, az * 3.0).into_inner();
            let f = FrameSolution::solve(g, g33, &o).unwrap();
            prop_assert!(f.residual <= 1e-12 * g.max(1.0));
            // Line-element identity for a generic displacement.
            let dx = Vector3::new(0.3, -0.7, 0.2);
            prop_assert!(f.line_element_residual(&dx).abs() <= 1e-12 * g.max(1.0));
            // Normalized triples stay on the unit sphere wherever defined.
            let sf = sphere_form(&f).unwrap();
            prop_assert!(sf.unit_norm_residual() <= 1e-12);
            // Inverse composes to the identity.
            let inv = f.inverse();
            prop_assert!(inv.composition_defect(&f) <= 1e-8);
        }

        #[test]
        fn external_random_blocks_solve(
            g in 0.1f64..10.0,
            d1 in 0.05f64..4.0,
            d2 in 0.05f64..4.0,
            d3 in 0.05f64..4.0,
            ax in -1.0f64..1.0,
            az in -1.0f64..1.0,
        ) {
            // Random SPD block via rotated positive diagonal.
            let rot = Rotation3::from_euler_angles(ax, 0.4, az).into_inner();
            let ext = rot * Matrix3::from_diagonal(&Vector3::new(d1, d2, d3)) * rot.transpose();
            let gauge = Rotation3::from_euler_angles(az, ax, 0.2).into_inner();
            let sol = ExternalFrameSolution::solve(g, &ext, &gauge).unwrap();
            prop_assert!(sol.residual <= 1e-10 * g.max(1.0));
        }
    }
}
