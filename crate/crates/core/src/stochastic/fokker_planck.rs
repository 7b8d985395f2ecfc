//! Explicit finite-difference solutions of the joint-density equations on
//! low-dimensional reductions with frozen or prescribed coefficients. The
//! scheme is conservative (flux form, donor-cell advection, central
//! diffusion) with no-flux boundaries, so mass is preserved to rounding.

use crate::error::Error;
use crate::stochastic::density::Axis;
use crate::Result;
use nalgebra::{DMatrix, Vector3};

/// Dense density over a 1D or 2D uniform grid.
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub axes: Vec<Axis>,
    /// Row-major over the axes (last axis fastest).
    pub data: Vec<f64>,
}

impl GridDensity {
    pub fn zeros(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidArgument("grid solver supports 1 or 2 dimensions".into()));
        }
        let n: usize = axes.iter().map(|a| a.bins as usize).product();
        Ok(Self { axes, data: vec![0.0; n] })
    }

    /// Point mass at the given coordinates (delta initial condition).
    pub fn delta(axes: Vec<Axis>, at: &[f64]) -> Result<Self> {
        let mut g = Self::zeros(axes)?;
        let idx: Option<Vec<usize>> = g
            .axes
            .iter()
            .zip(at)
            .map(|(a, v)| {
                if *v < a.lo || *v >= a.hi {
                    None
                } else {
                    Some(((v - a.lo) / a.width()).min(a.bins as f64 - 1.0) as usize)
                }
            })
            .collect();
        let idx = idx.ok_or_else(|| Error::InvalidArgument("delta location outside the grid".into()))?;
        let flat = g.flat_index(&idx);
        g.data[flat] = 1.0 / g.cell_volume();
        Ok(g)
    }

    /// Gaussian initial condition (normalized on the grid).
    pub fn gaussian(axes: Vec<Axis>, mean: &[f64], sigma: &[f64]) -> Result<Self> {
        let mut g = Self::zeros(axes)?;
        let dim = g.axes.len();
        let n0 = g.axes[0].bins as usize;
        let n1 = if dim == 2 { g.axes[1].bins as usize } else { 1 };
        for i in 0..n0 {
            for j in 0..n1 {
                let mut w = 1.0;
                let c0 = g.axes[0].center(i as u32);
                w *= (-((c0 - mean[0]) / sigma[0]).powi(2) / 2.0).exp();
                if dim == 2 {
                    let c1 = g.axes[1].center(j as u32);
                    w *= (-((c1 - mean[1]) / sigma[1]).powi(2) / 2.0).exp();
                }
                let flat = i * n1 + j;
                g.data[flat] = w;
            }
        }
        g.normalize();
        Ok(g)
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        match self.axes.len() {
            1 => idx[0],
            _ => idx[0] * self.axes[1].bins as usize + idx[1],
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.width()).product()
    }

    pub fn mass(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn normalize(&mut self) {
        let m = self.mass();
        if m > 0.0 {
            for v in &mut self.data {
                *v /= m;
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Mean and variance along one axis.
    pub fn moments(&self, axis: usize) -> (f64, f64) {
        let vol = self.cell_volume();
        let dim = self.axes.len();
        let n1 = if dim == 2 { self.axes[1].bins as usize } else { 1 };
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (flat, p) in self.data.iter().enumerate() {
            let idx = if axis == 0 { flat / n1 } else { flat % n1 };
            let c = self.axes[axis].center(idx as u32);
            m0 += p * vol;
            m1 += p * c * vol;
            m2 += p * c * c * vol;
        }
        let mean = m1 / m0;
        (mean, m2 / m0 - mean * mean)
    }

    pub fn value_at(&self, at: &[f64]) -> f64 {
        let idx: Option<Vec<usize>> = self
            .axes
            .iter()
            .zip(at)
            .map(|(a, v)| {
                if *v < a.lo || *v >= a.hi {
                    None
                } else {
                    Some(((v - a.lo) / a.width()).min(a.bins as f64 - 1.0) as usize)
                }
            })
            .collect();
        match idx {
            Some(idx) => self.data[self.flat_index(&idx)],
            None => 0.0,
        }
    }
}

/// Drift fields for the toy reductions.
#[derive(Debug, Clone)]
pub enum DriftField {
    Zero,
    Constant(Vec<f64>),
    /// Linear restoring drift `-rate * x` per component.
    LinearRestoring { rate: f64 },
    /// The one-component phase reduction `(xi, x)`: the velocity component
    /// accelerates by `a (xi^2 - lam2)`, the coordinate advects by `xi`.
    FrozenShapePhase { a: f64, lam2: f64 },
}

impl DriftField {
    pub fn eval(&self, at: &[f64], out: &mut [f64]) {
        match self {
            Self::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Self::Constant(c) => out.copy_from_slice(&c[..out.len()]),
            Self::LinearRestoring { rate } => {
                for (o, x) in out.iter_mut().zip(at) {
                    *o = -rate * x;
                }
            }
            Self::FrozenShapePhase { a, lam2 } => {
                let xi = at[0];
                out[0] = a * (xi * xi - lam2);
                if out.len() > 1 {
                    out[1] = xi;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FpOptions {
    /// Explicit step; auto-selected from the stability bound when absent.
    pub dt: Option<f64>,
    /// Safety factor against the stability bound.
    pub safety: f64,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self { dt: None, safety: 0.4 }
    }
}

fn stability_bound(grid: &GridDensity, drift: &DriftField, diffusion: &DMatrix<f64>) -> f64 {
    let dim = grid.axes.len();
    // Max drift magnitude over the grid corners and center (the fields are
    // smooth low-order polynomials).
    let mut amax = vec![1e-12f64; dim];
    let mut probe = vec![0.0; dim];
    let mut out = vec![0.0; dim];
    let corners: Vec<Vec<f64>> = match dim {
        1 => vec![vec![grid.axes[0].lo], vec![grid.axes[0].hi], vec![0.5 * (grid.axes[0].lo + grid.axes[0].hi)]],
        _ => {
            let xs = [grid.axes[0].lo, grid.axes[0].hi];
            let ys = [grid.axes[1].lo, grid.axes[1].hi];
            let mut v: Vec<Vec<f64>> = xs
                .iter()
                .flat_map(|x| ys.iter().map(move |y| vec![*x, *y]))
                .collect();
            v.push(vec![
                0.5 * (grid.axes[0].lo + grid.axes[0].hi),
                0.5 * (grid.axes[1].lo + grid.axes[1].hi),
            ]);
            v
        }
    };
    for c in corners {
        probe.copy_from_slice(&c);
        drift.eval(&probe, &mut out);
        for d in 0..dim {
            amax[d] = amax[d].max(out[d].abs());
        }
    }
    let mut bound = f64::INFINITY;
    for d in 0..dim {
        let h = grid.axes[d].width();
        bound = bound.min(h / amax[d]);
        let dd = diffusion[(d, d)].max(1e-300);
        bound = bound.min(h * h / (2.0 * dim as f64 * dd));
    }
    bound
}

/// Advances the density equation
/// `dP/ds = -div(A P) + div(D grad P)` to `s_end` by an explicit
/// conservative scheme (donor-cell advection, central diffusion, no-flux
/// boundaries).
pub fn fp_solve(
    init: &GridDensity,
    drift: &DriftField,
    diffusion: &DMatrix<f64>,
    s_end: f64,
    opts: &FpOptions,
) -> Result<GridDensity> {
    let dim = init.axes.len();
    if diffusion.nrows() != dim || diffusion.ncols() != dim {
        return Err(Error::InvalidArgument("diffusion matrix dimension mismatch".into()));
    }
    let bound = stability_bound(init, drift, diffusion);
    let dt = match opts.dt {
        Some(dt) => {
            if dt > bound {
                return Err(Error::CflViolation(format!(
                    "step {dt} exceeds the stability bound {bound:.3e}"
                )));
            }
            dt
        }
        None => opts.safety * bound,
    };
    let n_steps = (s_end / dt).ceil() as usize;
    let dt = s_end / n_steps as f64;

    let mut grid = init.clone();
    let n0 = grid.axes[0].bins as usize;
    let n1 = if dim == 2 { grid.axes[1].bins as usize } else { 1 };
    let h0 = grid.axes[0].width();
    let h1 = if dim == 2 { grid.axes[1].width() } else { 1.0 };

    let mut next = vec![0.0; grid.data.len()];
    let mut drift_buf = vec![0.0; dim];
    let mut at = vec![0.0; dim];

    for _ in 0..n_steps {
        next.copy_from_slice(&grid.data);
        // Fluxes across interior faces along each axis.
        for axis in 0..dim {
            let (n_faces_0, n_faces_1, h) = if axis == 0 { (n0 - 1, n1, h0) } else { (n0, n1 - 1, h1) };
            for i in 0..n_faces_0 {
                for j in 0..n_faces_1 {
                    // Cells on either side of the face.
                    let (lo_idx, hi_idx) = if axis == 0 {
                        (i * n1 + j, (i + 1) * n1 + j)
                    } else {
                        (i * n1 + j, i * n1 + j + 1)
                    };
                    // Face-centered coordinates.
                    at[0] = if axis == 0 {
                        grid.axes[0].lo + (i as f64 + 1.0) * h0
                    } else {
                        grid.axes[0].center(i as u32)
                    };
                    if dim == 2 {
                        at[1] = if axis == 1 {
                            grid.axes[1].lo + (j as f64 + 1.0) * h1
                        } else {
                            grid.axes[1].center(j as u32)
                        };
                    }
                    drift.eval(&at, &mut drift_buf);
                    let vel = drift_buf[axis];
                    // Hybrid advective flux: second-order central where the
                    // face Peclet number allows, donor-cell upwind otherwise.
                    let d_axis = diffusion[(axis, axis)];
                    let peclet = if d_axis > 0.0 { vel.abs() * h / d_axis } else { f64::INFINITY };
                    let advected = if peclet <= 2.0 {
                        0.5 * (grid.data[lo_idx] + grid.data[hi_idx])
                    } else if vel >= 0.0 {
                        grid.data[lo_idx]
                    } else {
                        grid.data[hi_idx]
                    };
                    let mut flux = vel * advected;
                    // Diagonal diffusive flux.
                    flux -= diffusion[(axis, axis)] * (grid.data[hi_idx] - grid.data[lo_idx]) / h;
                    // Mixed diffusive flux (2D): -D01 dP/d(other) at the face.
                    if dim == 2 {
                        let other = 1 - axis;
                        let d_off = diffusion[(axis, other)];
                        if d_off != 0.0 {
                            let grad_other = face_transverse_gradient(
                                &grid.data, n0, n1, axis, i, j, if other == 0 { h0 } else { h1 },
                            );
                            flux -= d_off * grad_other;
                        }
                    }
                    let transfer = flux * dt / h;
                    next[lo_idx] -= transfer;
                    next[hi_idx] += transfer;
                }
            }
        }
        grid.data.copy_from_slice(&next);
    }
    Ok(grid)
}

/// Central transverse gradient of the density at an interior face.
fn face_transverse_gradient(
    data: &[f64],
    n0: usize,
    n1: usize,
    axis: usize,
    i: usize,
    j: usize,
    h_other: f64,
) -> f64 {
    let get = |a: isize, b: isize| -> f64 {
        if a < 0 || b < 0 || a as usize >= n0 || b as usize >= n1 {
            0.0
        } else {
            data[a as usize * n1 + b as usize]
        }
    };
    let (ii, jj) = (i as isize, j as isize);
    if axis == 0 {
        // Face between (i, j) and (i+1, j); transverse along axis 1.
        let up = 0.5 * (get(ii, jj + 1) + get(ii + 1, jj + 1));
        let dn = 0.5 * (get(ii, jj - 1) + get(ii + 1, jj - 1));
        (up - dn) / (2.0 * h_other)
    } else {
        let up = 0.5 * (get(ii + 1, jj) + get(ii + 1, jj + 1));
        let dn = 0.5 * (get(ii - 1, jj) + get(ii - 1, jj + 1));
        (up - dn) / (2.0 * h_other)
    }
}

/// Phase-space reduction: scalar power `epsilon` acts as an isotropic
/// Laplacian on every retained component.
pub fn fp_solve_phase(
    init: &GridDensity,
    drift: &DriftField,
    epsilon: f64,
    s_end: f64,
    opts: &FpOptions,
) -> Result<GridDensity> {
    let dim = init.axes.len();
    let d = DMatrix::from_diagonal_element(dim, dim, epsilon);
    fp_solve(init, drift, &d, s_end, opts)
}

/// Momentum-space reduction with coefficients frozen at a reference point:
/// the diffusion matrix is `B eps B^T` for the frozen coupling matrix `B`.
pub fn fp_solve_momentum(
    init: &GridDensity,
    drift: &DriftField,
    frozen_coupling: &nalgebra::Matrix3<f64>,
    eps: &nalgebra::Matrix3<f64>,
    retained: &[usize],
    s_end: f64,
    opts: &FpOptions,
) -> Result<GridDensity> {
    let full = frozen_coupling * eps * frozen_coupling.transpose();
    let dim = init.axes.len();
    if retained.len() != dim {
        return Err(Error::InvalidArgument("retained-component list must match grid dimension".into()));
    }
    let mut d = DMatrix::zeros(dim, dim);
    for (a, ia) in retained.iter().enumerate() {
        for (b, ib) in retained.iter().enumerate() {
            d[(a, b)] = full[(*ia, *ib)];
        }
    }
    fp_solve(init, drift, &d, s_end, opts)
}

/// Frozen coupling matrix at a reference velocity (helper for the momentum
/// reduction).
pub fn frozen_coupling_at(xi: &Vector3<f64>, lam2: f64) -> nalgebra::Matrix3<f64> {
    crate::stochastic::noise_coupling_matrix(xi, lam2)
}

/// Euler-Maruyama endpoints of `n_paths` independent paths driven by the
/// same drift field and a constant noise transform `L` (increments
/// `L z sqrt(ds)` for standard normals `z`, i.e. diffusion `D = L L^T / 2`
/// in the density equation's normalization). The Monte Carlo counterpart of
/// `fp_solve` for cross-validation.
pub fn mc_endpoints(
    drift: &DriftField,
    noise_transform: &DMatrix<f64>,
    init_mean: &[f64],
    init_sigma: &[f64],
    ds: f64,
    s_end: f64,
    n_paths: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    use crate::stochastic::CounterRng;
    use rayon::prelude::*;
    let dim = init_mean.len();
    let n_steps = (s_end / ds).round().max(1.0) as u64;
    let ds = s_end / n_steps as f64;
    let sqrt_ds = ds.sqrt();
    let rng = CounterRng::new(seed);
    (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut path = rng.path(p as u64);
            let mut buf = [0.0; 8];
            path.normals(0, &mut buf);
            let mut x: Vec<f64> = (0..dim).map(|d| init_mean[d] + init_sigma[d] * buf[d]).collect();
            let mut a = vec![0.0; dim];
            for step in 1..=n_steps {
                path.normals(step, &mut buf);
                drift.eval(&x, &mut a);
                for i in 0..dim {
                    let mut inc = 0.0;
                    for j in 0..dim {
                        inc += noise_transform[(i, j)] * buf[j];
                    }
                    x[i] += a[i] * ds + inc * sqrt_ds;
                }
            }
            x
        })
        .collect()
}
