//! Linear deviation of neighboring geodesics: the second-order equation for
//! the separation vector driven by the connection, its flow derivative, and
//! the curvature tensor, validated against finite-difference pairs of
//! geodesics and reduced to a growth exponent.

use crate::error::Error;
use crate::geodesic::{shape_acceleration, GeodesicTrajectory};
use crate::manifold::{coevolved_point, ConformalChart, CurvatureBundle};
use crate::ode::{self, OdeOptions};
use crate::system::SystemSpec;
use crate::Result;
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

/// Deviation vector and its rate along a base geodesic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationState {
    pub zeta: Vector3<f64>,
    pub zeta_dot: Vector3<f64>,
    /// Family-parameter label of the neighboring geodesic.
    pub eta: f64,
}

/// Second derivative of the deviation vector: the expanded covariant form
/// with the velocity-contracted curvature term,
/// `zdd^i = -2 G^i_jl xi^j zd^l - Gdot^i_jl xi^j z^l
///          + G^i_jl G^j_kp xi^k xi^p z^l - G^i_jn G^n_kl xi^j xi^k z^l
///          - R^i_jkl xi^j z^k xi^l`.
pub fn deviation_acceleration(
    bundle: &CurvatureBundle<f64>,
    xi: &Vector3<f64>,
    zeta: &Vector3<f64>,
    zeta_dot: &Vector3<f64>,
) -> Vector3<f64> {
    let g = &bundle.gamma;
    let gd = &bundle.gamma_dot;
    let r = &bundle.riemann;
    let mut out = Vector3::zeros();
    for i in 0..3 {
        let mut v = 0.0;
        for j in 0..3 {
            for l in 0..3 {
                v -= 2.0 * g[i][j][l] * xi[j] * zeta_dot[l];
                v -= gd[i][j][l] * xi[j] * zeta[l];
                for k in 0..3 {
                    for p in 0..3 {
                        v += g[i][j][l] * g[j][k][p] * xi[k] * xi[p] * zeta[l];
                    }
                }
            }
        }
        for j in 0..3 {
            for n in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        v -= g[i][j][n] * g[n][k][l] * xi[j] * xi[k] * zeta[l];
                    }
                }
            }
        }
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    v -= r[i][j][k][l] * xi[j] * zeta[k] * xi[l];
                }
            }
        }
        out[i] = v;
    }
    out
}

/// Joint base-plus-deviation integration over a closed-form chart field.
pub fn integrate_deviation_on_chart<C: ConformalChart<f64>>(
    chart: &C,
    j_total: f64,
    x0: &Vector3<f64>,
    xi0: &Vector3<f64>,
    dev0: &DeviationState,
    s_end: f64,
    opts: &OdeOptions,
) -> Result<DeviationTrajectory> {
    let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let x = Vector3::new(y[0], y[1], y[2]);
        let xi = Vector3::new(y[3], y[4], y[5]);
        let zeta = Vector3::new(y[6], y[7], y[8]);
        let zeta_dot = Vector3::new(y[9], y[10], y[11]);
        let g = chart.factor(&x)?;
        let a = chart.log_gradient(&x)?;
        let da = chart.log_gradient_derivatives(&x)?;
        let bundle = CurvatureBundle::assemble(g, j_total, a, &da, &xi);
        let dxi = shape_acceleration(&a, &xi, bundle.lambda_sq);
        let zdd = deviation_acceleration(&bundle, &xi, &zeta, &zeta_dot);
        dy[..3].copy_from_slice(xi.as_slice());
        dy[3..6].copy_from_slice(dxi.as_slice());
        dy[6..9].copy_from_slice(zeta_dot.as_slice());
        dy[9..12].copy_from_slice(zdd.as_slice());
        Ok(())
    };
    let mut y0 = [0.0; 12];
    y0[..3].copy_from_slice(x0.as_slice());
    y0[3..6].copy_from_slice(xi0.as_slice());
    y0[6..9].copy_from_slice(dev0.zeta.as_slice());
    y0[9..12].copy_from_slice(dev0.zeta_dot.as_slice());
    let sol = ode::integrate(rhs, &y0, (0.0, s_end), opts, None, None)?;
    Ok(DeviationTrajectory::from_solution(sol, 6, dev0.eta))
}

/// Sampled deviation history.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationSample {
    pub s: f64,
    pub zeta: [f64; 3],
    pub zeta_dot: [f64; 3],
    pub norm: f64,
    pub log_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DeviationTrajectory {
    pub samples: Vec<DeviationSample>,
    pub eta: f64,
    offset: usize,
    solution: ode::OdeSolution,
}

impl DeviationTrajectory {
    fn from_solution(sol: ode::OdeSolution, offset: usize, eta: f64) -> Self {
        let samples = sol
            .s
            .iter()
            .zip(sol.y.iter())
            .map(|(s, y)| {
                let zeta = [y[offset], y[offset + 1], y[offset + 2]];
                let zeta_dot = [y[offset + 3], y[offset + 4], y[offset + 5]];
                let norm = (zeta[0] * zeta[0] + zeta[1] * zeta[1] + zeta[2] * zeta[2]).sqrt();
                DeviationSample { s: *s, zeta, zeta_dot, norm, log_norm: norm.max(1e-300).ln() }
            })
            .collect();
        Self { samples, eta, offset, solution: sol }
    }

    /// Deviation vector at `s` (dense output of the integration).
    pub fn zeta_at(&self, s: f64) -> Option<Vector3<f64>> {
        let (lo, hi) = (self.samples.first()?.s, self.samples.last()?.s);
        if s < lo || s > hi {
            return None;
        }
        let y = self.solution.sample(s);
        Some(Vector3::new(y[self.offset], y[self.offset + 1], y[self.offset + 2]))
    }
}

/// Cubic interpolation (Hermite with finite-difference slopes) of curvature
/// coefficients sampled along the base trajectory.
struct CoefficientTrack {
    s: Vec<f64>,
    values: Vec<Vec<f64>>, // per node: a(3) then da(9)
    slopes: Vec<Vec<f64>>,
}

impl CoefficientTrack {
    fn build(s: Vec<f64>, values: Vec<Vec<f64>>) -> Self {
        let n = s.len();
        let dim = values[0].len();
        let mut slopes = vec![vec![0.0; dim]; n];
        for i in 0..n {
            let (i0, i1) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            let ds = s[i1] - s[i0];
            for d in 0..dim {
                slopes[i][d] = (values[i1][d] - values[i0][d]) / ds;
            }
        }
        Self { s, values, slopes }
    }

    fn eval(&self, s: f64) -> Vec<f64> {
        let n = self.s.len();
        let i = match self.s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let h = self.s[i + 1] - self.s[i];
        let u = ((s - self.s[i]) / h).clamp(0.0, 1.0);
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u),
            u * (1.0 - u) * (1.0 - u),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        (0..self.values[0].len())
            .map(|d| {
                h00 * self.values[i][d]
                    + h10 * h * self.slopes[i][d]
                    + h01 * self.values[i + 1][d]
                    + h11 * h * self.slopes[i + 1][d]
            })
            .collect()
    }
}

/// Integrates the deviation equation along an already-integrated base
/// trajectory of the real system, with curvature coefficients sampled at the
/// base nodes and interpolated between them.
pub fn integrate_deviation(
    base: &GeodesicTrajectory,
    spec: &SystemSpec,
    dev0: &DeviationState,
    opts: &OdeOptions,
) -> Result<DeviationTrajectory> {
    let gauge = Matrix3::identity();
    let mut s_nodes = Vec::new();
    let mut coeff = Vec::new();
    for node in &base.samples {
        let point = coevolved_point(spec, &node.rho, &gauge)?;
        let mut row = Vec::with_capacity(12);
        row.extend_from_slice(&point.a);
        for i in 0..3 {
            for k in 0..3 {
                row.push(point.da[(i, k)]);
            }
        }
        s_nodes.push(node.s);
        coeff.push(row);
    }
    if s_nodes.len() < 2 {
        return Err(Error::InvalidArgument("base trajectory has too few nodes".into()));
    }
    let track = CoefficientTrack::build(s_nodes, coeff);
    let j_total = spec.j_total();
    let s0 = base.samples.first().unwrap().s;
    let s_end = base.s_end();

    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let st = base.sample(s.clamp(s0, s_end));
        let xi = st.xi;
        let row = track.eval(s);
        let a = [row[0], row[1], row[2]];
        let mut da = Matrix3::zeros();
        for i in 0..3 {
            for k in 0..3 {
                da[(i, k)] = row[3 + 3 * i + k];
            }
        }
        let g = spec.conformal_factor(&st.rho)?;
        let bundle = CurvatureBundle::assemble(g, j_total, a, &da, &xi);
        let zeta = Vector3::new(y[0], y[1], y[2]);
        let zeta_dot = Vector3::new(y[3], y[4], y[5]);
        let zdd = deviation_acceleration(&bundle, &xi, &zeta, &zeta_dot);
        dy[..3].copy_from_slice(zeta_dot.as_slice());
        dy[3..6].copy_from_slice(zdd.as_slice());
        Ok(())
    };
    let mut y0 = [0.0; 6];
    y0[..3].copy_from_slice(dev0.zeta.as_slice());
    y0[3..6].copy_from_slice(dev0.zeta_dot.as_slice());
    let sol = ode::integrate(rhs, &y0, (s0, s_end), opts, None, None)?;
    Ok(DeviationTrajectory::from_solution(sol, 0, dev0.eta))
}

/// Least-squares slope of `ln |zeta|` against `s` over a window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthFit {
    pub lambda: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

pub fn growth_exponent(traj: &DeviationTrajectory, window: (f64, f64)) -> Result<GrowthFit> {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|p| p.s >= window.0 && p.s <= window.1)
        .map(|p| (p.s, p.log_norm))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "growth window [{}, {}] holds only {} points",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InvalidArgument("degenerate growth window".into()));
    }
    let lambda = (n * sxy - sx * sy) / denom;
    let intercept = (sy - lambda * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - (intercept + lambda * p.0)).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(GrowthFit { lambda, intercept, r_squared, n_points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{integrate_geodesic, GaugePolicy, GeodesicOptions, Horizon};
    use crate::kinematics::derive_masses;
    use crate::kinematics::potential::PotentialSpec;
    use crate::manifold::{ConstantFactor, QuadraticLogFactor};
    use crate::newtonian::PhaseState12;
    use approx::assert_relative_eq;

    fn opts() -> OdeOptions {
        OdeOptions { rtol: 1e-11, atol: 1e-13, ..Default::default() }
    }

    #[test]
    fn flat_field_gives_exact_linear_growth() {
        let chart = ConstantFactor(1.7);
        let dev0 = DeviationState {
            zeta: Vector3::new(0.2, -0.1, 0.4),
            zeta_dot: Vector3::new(0.05, 0.3, -0.2),
            eta: 0.0,
        };
        let traj = integrate_deviation_on_chart(
            &chart,
            0.0,
            &Vector3::new(0.1, 0.2, 0.3),
            &Vector3::new(0.4, -0.1, 0.2),
            &dev0,
            3.0,
            &opts(),
        )
        .unwrap();
        for p in &traj.samples {
            let expect = dev0.zeta + dev0.zeta_dot * p.s;
            for i in 0..3 {
                assert_relative_eq!(p.zeta[i], expect[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn flat_parallel_deviation_stays_parallel() {
        let chart = ConstantFactor(1.0);
        let xi0 = Vector3::new(0.3, 0.4, 0.0);
        let dev0 = DeviationState { zeta: xi0 * 0.1, zeta_dot: Vector3::zeros(), eta: 0.0 };
        let traj =
            integrate_deviation_on_chart(&chart, 0.0, &Vector3::zeros(), &xi0, &dev0, 2.0, &opts()).unwrap();
        for p in &traj.samples {
            let z = Vector3::from_row_slice(&p.zeta);
            assert!(z.cross(&xi0).norm() <= 1e-12);
        }
    }

    #[test]
    fn deviation_is_exactly_linear_in_initial_data() {
        let chart = QuadraticLogFactor {
            c: Vector3::new(0.6, -0.2, 0.3),
            q: Matrix3::new(0.2, 0.05, 0.0, 0.05, -0.1, 0.02, 0.0, 0.02, 0.12),
        };
        let x0 = Vector3::new(0.1, -0.1, 0.2);
        let xi0 = Vector3::new(0.5, 0.2, -0.3);
        let dev0 = DeviationState {
            zeta: Vector3::new(0.3, -0.2, 0.1),
            zeta_dot: Vector3::new(-0.1, 0.2, 0.05),
            eta: 0.0,
        };
        let one = integrate_deviation_on_chart(&chart, 0.0, &x0, &xi0, &dev0, 2.0, &opts()).unwrap();
        let dev2 = DeviationState { zeta: dev0.zeta * 2.0, zeta_dot: dev0.zeta_dot * 2.0, eta: 0.0 };
        let two = integrate_deviation_on_chart(&chart, 0.0, &x0, &xi0, &dev2, 2.0, &opts()).unwrap();
        let z1 = one.zeta_at(1.8).unwrap();
        let z2 = two.zeta_at(1.8).unwrap();
        assert_relative_eq!((z2 - z1 * 2.0).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn matches_finite_difference_pair_on_chart_field() {
        let chart = QuadraticLogFactor {
            c: Vector3::new(0.6, -0.2, 0.3),
            q: Matrix3::new(0.2, 0.05, 0.0, 0.05, -0.1, 0.02, 0.0, 0.02, 0.12),
        };
        let x0 = Vector3::new(0.1, -0.1, 0.2);
        let xi0 = Vector3::new(0.5, 0.2, -0.3);
        let dir = Vector3::new(1.0, 0.0, 0.0);
        let dev0 = DeviationState { zeta: dir, zeta_dot: Vector3::zeros(), eta: 1e-6 };
        let s_end = 1.5;
        let dev = integrate_deviation_on_chart(&chart, 0.0, &x0, &xi0, &dev0, s_end, &opts()).unwrap();

        // Finite-difference pair.
        let eta = 1e-6;
        let run = |x0: Vector3<f64>| {
            let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                let x = Vector3::new(y[0], y[1], y[2]);
                let xi = Vector3::new(y[3], y[4], y[5]);
                let a = chart.log_gradient(&x)?;
                let dxi = shape_acceleration(&a, &xi, 0.0);
                dy[..3].copy_from_slice(xi.as_slice());
                dy[3..6].copy_from_slice(dxi.as_slice());
                Ok(())
            };
            let y0 = [x0[0], x0[1], x0[2], xi0[0], xi0[1], xi0[2]];
            ode::integrate(rhs, &y0, (0.0, s_end), &opts(), None, None).unwrap()
        };
        let base = run(x0);
        let pert = run(x0 + dir * eta);
        for s in [0.5, 1.0, 1.45] {
            let xb = base.sample(s);
            let xp = pert.sample(s);
            let fd = Vector3::new(xp[0] - xb[0], xp[1] - xb[1], xp[2] - xb[2]) / eta;
            let z = dev.zeta_at(s).unwrap();
            let rel = (fd - z).norm() / z.norm();
            assert!(rel <= 1e-3, "s = {s}: FD mismatch {rel}");
        }
    }

    fn isosceles_setup() -> (SystemSpec, crate::geodesic::InternalState) {
        let m: crate::kinematics::MassTriple<f64> = derive_masses(1.0, 1.0, 1.0).unwrap();
        let pot = PotentialSpec::morse_uniform(1.0, 1.0, 1.0);
        let j = crate::kinematics::JacobiState {
            big_r: Vector3::new(1.2, 0.0, 0.0),
            r: Vector3::new(0.0, 0.0, 1.0),
            p_r: Vector3::new(0.0, 0.0, -0.4) * (m.mu0 * m.mu3).sqrt(),
            p_big_r: Vector3::new(0.35, 0.0, 0.0) * (m.mu0 * m.mu2).sqrt(),
        };
        let st = PhaseState12::from_jacobi(&j, &m);
        let mut spec = SystemSpec::new(m, pot, 0.0, st.q_big_r.norm(), [0.0; 3], 3.0).unwrap();
        spec.energy = crate::newtonian::hamiltonian(&st, &spec).unwrap();
        let init = crate::geodesic::InternalState::from_phase(&st, &spec).unwrap();
        (spec, init)
    }

    #[test]
    fn real_trajectory_deviation_is_linear_and_finite() {
        let (spec, init) = isosceles_setup();
        let gopts = GeodesicOptions { rtol: 1e-12, atol: 1e-13, ..Default::default() };
        let base =
            integrate_geodesic(&init, &spec, &GaugePolicy::Identity, Horizon::ArcLength(2.0), &gopts).unwrap();
        let dev0 = DeviationState {
            zeta: Vector3::new(1.0, 0.3, 0.0),
            zeta_dot: Vector3::new(0.0, -0.2, 0.1),
            eta: 0.0,
        };
        let one = integrate_deviation(&base, &spec, &dev0, &opts()).unwrap();
        let dev3 = DeviationState { zeta: dev0.zeta * 3.0, zeta_dot: dev0.zeta_dot * 3.0, eta: 0.0 };
        let three = integrate_deviation(&base, &spec, &dev3, &opts()).unwrap();
        for s in [0.7, 1.3, 1.9] {
            let z1 = one.zeta_at(s).unwrap();
            let z3 = three.zeta_at(s).unwrap();
            assert!(z1.norm().is_finite() && z1.norm() > 0.0);
            // Exactly linear flow; the bound absorbs error amplification of
            // the exponentially growing modes across different step choices.
            let rel = (z3 - z1 * 3.0).norm() / (3.0 * z1.norm());
            assert!(rel <= 1e-5, "nonlinearity {rel} at s = {s}");
        }
    }

    #[test]
    fn growth_exponent_flat_is_tiny_and_scale_invariant() {
        let chart = ConstantFactor(1.0);
        let xi0 = Vector3::new(0.5, 0.1, -0.2);
        let mk = |scale: f64| {
            let dev0 = DeviationState {
                zeta: Vector3::new(0.1, 0.0, 0.0) * scale,
                zeta_dot: Vector3::new(0.0, 0.02, 0.0) * scale,
                eta: 0.0,
            };
            integrate_deviation_on_chart(&chart, 0.0, &Vector3::zeros(), &xi0, &dev0, 60.0, &opts()).unwrap()
        };
        let f1 = growth_exponent(&mk(1.0), (1.0, 60.0)).unwrap();
        let f2 = growth_exponent(&mk(2.0), (1.0, 60.0)).unwrap();
        // Linear-in-s growth: the log slope decays toward zero over the
        // window; rescaling the initial data must not change it.
        assert!(f1.lambda.abs() < 0.05, "flat growth exponent {}", f1.lambda);
        assert_relative_eq!(f1.lambda, f2.lambda, max_relative = 0.05, epsilon = 1e-12);
    }

    #[test]
    fn exponent_ordering_consistent_with_fd_pair_divergence() {
        // Weakly varying versus strongly varying factor fields: the fitted
        // growth exponents must order the two cases the same way the raw
        // finite-difference pair divergences do.
        let run = |scale: f64| {
            let chart = QuadraticLogFactor {
                c: Vector3::new(0.6, -0.2, 0.3) * scale,
                q: Matrix3::new(0.3, 0.08, 0.02, 0.08, -0.15, 0.05, 0.02, 0.05, 0.2) * scale,
            };
            let x0 = Vector3::new(0.1, -0.1, 0.2);
            let xi0 = Vector3::new(0.5, 0.35, -0.3);
            let dir = Vector3::new(0.7, 0.5, -0.3).normalize();
            let dev0 = DeviationState { zeta: dir, zeta_dot: Vector3::zeros(), eta: 1e-6 };
            let s_end = 5.0;
            let dev = integrate_deviation_on_chart(&chart, 0.0, &x0, &xi0, &dev0, s_end, &opts()).unwrap();
            let fit = growth_exponent(&dev, (1.0, s_end)).unwrap();
            let run_geo = |x0: Vector3<f64>| {
                let f = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                    let x = Vector3::new(y[0], y[1], y[2]);
                    let xi = Vector3::new(y[3], y[4], y[5]);
                    let a = chart.log_gradient(&x)?;
                    let dxi = shape_acceleration(&a, &xi, 0.0);
                    dy[..3].copy_from_slice(xi.as_slice());
                    dy[3..6].copy_from_slice(dxi.as_slice());
                    Ok(())
                };
                let y0 = [x0[0], x0[1], x0[2], xi0[0], xi0[1], xi0[2]];
                ode::integrate(f, &y0, (0.0, s_end), &opts(), None, None).unwrap()
            };
            let base = run_geo(x0);
            let pert = run_geo(x0 + dir * 1e-6);
            // Empirical growth exponent of the raw pair over the same window.
            let pts: Vec<(f64, f64)> = (0..30)
                .map(|k| {
                    let s = 1.0 + 4.0 * k as f64 / 29.0;
                    let xb = base.sample(s);
                    let xp = pert.sample(s);
                    let d = ((xp[0] - xb[0]).powi(2) + (xp[1] - xb[1]).powi(2) + (xp[2] - xb[2]).powi(2))
                        .sqrt()
                        / 1e-6;
                    (s, d.max(1e-300).ln())
                })
                .collect();
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            let fd_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            (fit.lambda, fd_slope)
        };
        let (lam_weak, fd_weak) = run(0.25);
        let (lam_strong, fd_strong) = run(1.0);
        assert!(lam_weak.is_finite() && lam_strong.is_finite());
        assert!((lam_strong - lam_weak).abs() > 1e-3, "cases indistinguishable");
        assert_eq!(
            lam_strong > lam_weak,
            fd_strong > fd_weak,
            "exponent ordering ({lam_weak}, {lam_strong}) disagrees with FD ordering ({fd_weak}, {fd_strong})"
        );
        // The linear deviation reproduces the raw pair's growth rate.
        assert_relative_eq!(lam_strong, fd_strong, max_relative = 0.05, epsilon = 5e-3);
    }

    #[test]
    fn growth_window_needs_points() {
        let chart = ConstantFactor(1.0);
        let dev0 = DeviationState { zeta: Vector3::x(), zeta_dot: Vector3::zeros(), eta: 0.0 };
        let traj = integrate_deviation_on_chart(
            &chart,
            0.0,
            &Vector3::zeros(),
            &Vector3::x(),
            &dev0,
            1.0,
            &opts(),
        )
        .unwrap();
        assert!(growth_exponent(&traj, (5.0, 6.0)).is_err());
    }
}
