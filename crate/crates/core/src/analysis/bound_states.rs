//! Algebraic exploration of acceleration-free motion: the three vanishing
//! shape accelerations plus the energy-shell condition form four equations
//! in the six unknowns (velocities and log-gradient coefficients), whose
//! solution set is generically two-dimensional. Level surfaces of the
//! conformal factor host the bound-state candidates.

use crate::error::Error;
use crate::geodesic::shape_acceleration;
use crate::system::SystemSpec;
use crate::Result;
use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

/// Point data the zero-acceleration system needs.
#[derive(Debug, Clone, Copy)]
pub struct ZeroAccelProblem {
    /// Conformal factor at the point.
    pub g: f64,
    /// Rotation coefficient `(J/g)^2` at the point.
    pub lambda_sq: f64,
    /// Energy-shell value the velocities must satisfy.
    pub shell: f64,
}

impl ZeroAccelProblem {
    pub fn at_point(spec: &SystemSpec, rho: &[f64; 3]) -> Result<Self> {
        let g = spec.conformal_factor(rho)?;
        Ok(Self {
            g,
            lambda_sq: crate::manifold::lambda_sq(g, spec.j_total()),
            shell: spec.energy_shell(),
        })
    }
}

/// One admissible solution of the four-equation system.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroAccelSolution {
    pub xi: [f64; 3],
    pub a: [f64; 3],
    pub residual: f64,
}

/// Residuals of the four equations at `(xi, a)`: the three vanishing
/// accelerations and the shell condition.
pub fn zero_accel_residuals(problem: &ZeroAccelProblem, xi: &Vector3<f64>, a: &[f64; 3]) -> [f64; 4] {
    let acc = shape_acceleration(a, xi, problem.lambda_sq);
    let shell = 0.5 * problem.g * (xi.norm_squared() + problem.lambda_sq) - problem.shell;
    [acc[0], acc[1], acc[2], shell]
}

fn residual_vector(problem: &ZeroAccelProblem, u: &DVector<f64>) -> DVector<f64> {
    let xi = Vector3::new(u[0], u[1], u[2]);
    let a = [u[3], u[4], u[5]];
    DVector::from_column_slice(&zero_accel_residuals(problem, &xi, &a))
}

fn residual_jacobian(problem: &ZeroAccelProblem, u: &DVector<f64>) -> DMatrix<f64> {
    let h = 1e-7;
    let mut jac = DMatrix::zeros(4, 6);
    for c in 0..6 {
        let mut up = u.clone();
        let mut um = u.clone();
        up[c] += h;
        um[c] -= h;
        let fp = residual_vector(problem, &up);
        let fm = residual_vector(problem, &um);
        for r in 0..4 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}

/// Finds admissible solutions by grid-seeded Gauss-Newton refinement.
/// Every returned solution satisfies all four equations to `tol`;
/// near-duplicates are merged.
pub fn zero_accel_solve(
    problem: &ZeroAccelProblem,
    a_box: f64,
    seeds_per_axis: usize,
    tol: f64,
) -> Result<Vec<ZeroAccelSolution>> {
    let speed_sq = 2.0 * problem.shell / problem.g - problem.lambda_sq;
    if speed_sq <= 0.0 {
        return Err(Error::NoSolution(format!(
            "energy shell admits no velocities here (2H/g - L^2 = {speed_sq:.3e})"
        )));
    }
    let speed = speed_sq.sqrt();
    let n = seeds_per_axis.max(2);
    let mut solutions: Vec<ZeroAccelSolution> = Vec::new();

    // Velocity seeds on the shell sphere (golden-angle lattice), coefficient
    // seeds on a coarse cube.
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut seeds = Vec::new();
    for i in 0..n * n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / (n * n) as f64;
        let rad = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        let xi = Vector3::new(rad * phi.cos(), rad * phi.sin(), z) * speed;
        for ai in 0..n {
            let fa = -a_box + 2.0 * a_box * ai as f64 / (n - 1) as f64;
            for bi in 0..n {
                let fb = -a_box + 2.0 * a_box * bi as f64 / (n - 1) as f64;
                for ci in 0..n {
                    let fc = -a_box + 2.0 * a_box * ci as f64 / (n - 1) as f64;
                    seeds.push(DVector::from_column_slice(&[xi[0], xi[1], xi[2], fa, fb, fc]));
                }
            }
        }
    }

    for seed in seeds {
        let mut u = seed;
        let mut converged = false;
        for _ in 0..60 {
            let f = residual_vector(problem, &u);
            let norm = f.norm();
            if norm <= tol * 0.01 {
                converged = true;
                break;
            }
            let jac = residual_jacobian(problem, &u);
            // Damped minimum-norm Gauss-Newton step.
            let svd = jac.svd(true, true);
            match svd.solve(&f, 1e-10) {
                Ok(step) => {
                    let scale = if step.norm() > 1.0 { 1.0 / step.norm() } else { 1.0 };
                    u -= step * scale;
                }
                Err(_) => break,
            }
        }
        if !converged {
            continue;
        }
        let res = residual_vector(problem, &u);
        let max_res = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max_res > tol {
            continue;
        }
        let candidate = ZeroAccelSolution {
            xi: [u[0], u[1], u[2]],
            a: [u[3], u[4], u[5]],
            residual: max_res,
        };
        let dup = solutions.iter().any(|s| {
            let d: f64 = s
                .xi
                .iter()
                .zip(&candidate.xi)
                .chain(s.a.iter().zip(&candidate.a))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            d.sqrt() < 1e-4 * speed.max(1.0)
        });
        if !dup {
            solutions.push(candidate);
        }
    }
    if solutions.is_empty() {
        return Err(Error::NoSolution("no admissible zero-acceleration solution found".into()));
    }
    Ok(solutions)
}

/// Local dimension of the solution set at a solution: the nullity of the
/// residual Jacobian (singular values below `rel_tol` of the largest).
pub fn solution_set_dimension(
    problem: &ZeroAccelProblem,
    sol: &ZeroAccelSolution,
    rel_tol: f64,
) -> usize {
    let u = DVector::from_column_slice(&[sol.xi[0], sol.xi[1], sol.xi[2], sol.a[0], sol.a[1], sol.a[2]]);
    let jac = residual_jacobian(problem, &u);
    let svd = jac.svd(false, false);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > rel_tol * smax)
        .count();
    6 - rank
}

/// Point on a factor level surface with its cell index (for connectivity).
#[derive(Debug, Clone, Serialize)]
pub struct LevelSurface {
    pub level: f64,
    pub points: Vec<[f64; 3]>,
    /// Residuals `|g(rho) - level|` per point.
    pub residuals: Vec<f64>,
    /// Connected-component label per point (grid-cell adjacency).
    pub components: Vec<usize>,
    pub n_components: usize,
}

/// Samples the level set `g(rho) = level` by sign-change bisection along
/// axis-parallel grid segments of the box, then groups the hits into
/// grid-adjacent components.
pub fn level_surface_sample(
    spec: &SystemSpec,
    level: f64,
    r_range: (f64, f64),
    big_r_range: (f64, f64),
    grid_n: usize,
    tol: f64,
) -> Result<LevelSurface> {
    if !(level > 0.0) {
        return Err(Error::InvalidArgument("level must be positive".into()));
    }
    let n = grid_n.max(4);
    let theta_range = (0.05, std::f64::consts::PI - 0.05);
    let coord = |range: (f64, f64), i: usize| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64;
    let g_at = |rho: &[f64; 3]| -> Option<f64> { spec.conformal_factor(rho).ok() };

    let mut points = Vec::new();
    let mut residuals = Vec::new();
    let mut cells = Vec::new();

    // Scan the three axis directions.
    for axis in 0..3 {
        for i in 0..n {
            for j in 0..n {
                let mut prev: Option<(f64, f64)> = None;
                for k in 0..n {
                    let (ir, ib, it) = match axis {
                        0 => (k, i, j),
                        1 => (i, k, j),
                        _ => (i, j, k),
                    };
                    let rho = [
                        coord(r_range, ir),
                        coord(big_r_range, ib),
                        spec.r0 * coord(theta_range, it),
                    ];
                    let val = g_at(&rho).map(|g| g - level);
                    if let (Some((prev_pos, prev_val)), Some(v)) = (prev, val) {
                        if prev_val * v < 0.0 {
                            // Bisect along this axis.
                            let mut lo = prev_pos;
                            let mut hi = rho[axis];
                            let mut flo = prev_val;
                            let mut probe = rho;
                            for _ in 0..200 {
                                let mid = 0.5 * (lo + hi);
                                probe[axis] = mid;
                                match g_at(&probe) {
                                    Some(g) => {
                                        let fm = g - level;
                                        if flo * fm <= 0.0 {
                                            hi = mid;
                                        } else {
                                            lo = mid;
                                            flo = fm;
                                        }
                                        if (g - level).abs() <= tol {
                                            break;
                                        }
                                    }
                                    None => break,
                                }
                            }
                            probe[axis] = 0.5 * (lo + hi);
                            if let Some(g) = g_at(&probe) {
                                if (g - level).abs() <= tol {
                                    let cell = [
                                        (((probe[0] - r_range.0) / (r_range.1 - r_range.0)) * (n - 1) as f64)
                                            as i64,
                                        (((probe[1] - big_r_range.0) / (big_r_range.1 - big_r_range.0))
                                            * (n - 1) as f64) as i64,
                                        (((probe[2] / spec.r0 - theta_range.0)
                                            / (theta_range.1 - theta_range.0))
                                            * (n - 1) as f64) as i64,
                                    ];
                                    points.push([probe[0], probe[1], probe[2]]);
                                    residuals.push((g - level).abs());
                                    cells.push(cell);
                                }
                            }
                        }
                    }
                    prev = val.map(|v| (rho[axis], v));
                }
            }
        }
    }

    if points.is_empty() {
        return Err(Error::NoSolution(format!("level set g = {level} is empty in the box")));
    }

    // Union-find over grid-cell adjacency (Chebyshev distance 1).
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let adj = (0..3).all(|d| (cells[i][d] - cells[j][d]).abs() <= 1);
            if adj {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut component_ids = std::collections::BTreeMap::new();
    let mut components = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let root = find(&mut parent, i);
        let next = component_ids.len();
        let id = *component_ids.entry(root).or_insert(next);
        components.push(id);
    }
    let n_components = component_ids.len();

    Ok(LevelSurface { level, points, residuals, components, n_components })
}
