//! Curvature machinery of the conformally flat shape manifold: log-gradient
//! coefficients, connection coefficients and their flow derivative, the
//! curvature tensor, and the chart providers that feed them.
//!
//! The conformal factor over the local chart is never stored as a global
//! field; it is evaluated through the co-evolved shape point, so every chart
//! quantity here is parameterized by per-point data `(g, a, da)`:
//! the factor, the log-gradient coefficients `a_i = -(1/2) d ln g / dx^i`,
//! and their chart derivatives.

use crate::error::Error;
use crate::frames::FrameSolution;
use crate::scalar::Real;
use crate::system::SystemSpec;
use crate::Result;
use nalgebra::{Matrix3, Vector3};

/// Threshold below which the flow derivative of `ln g` is treated as
/// vanishing and the auxiliary `b` coefficients become singular.
pub const B_SINGULAR_TOL: f64 = 1e-12;

pub type Christoffel<S> = [[[S; 3]; 3]; 3];
pub type Riemann<S> = [[[[S; 3]; 3]; 3]; 3];

/// Rotation-energy coefficient of the reduced equations: `(J/g)^2`.
pub fn lambda_sq<S: Real>(g: S, j_total: S) -> S {
    let r = j_total / g;
    r * r
}

/// Connection coefficients of a conformally flat 3-metric from the
/// log-gradient coefficients:
/// `G^i_jl = -d^i_l a_j - d^i_j a_l + d^ip d_jl a_p`.
pub fn christoffel<S: Real>(a: &[S; 3]) -> Christoffel<S> {
    let mut g = [[[S::zero(); 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                let mut v = S::zero();
                if i == l {
                    v -= a[j];
                }
                if i == j {
                    v -= a[l];
                }
                if j == l {
                    v += a[i];
                }
                g[i][j][l] = v;
            }
        }
    }
    g
}

/// Chart derivatives of the connection from the derivatives of `a`:
/// `dG[i][j][l][k] = d G^i_jl / d x^k`.
pub fn christoffel_derivatives<S: Real>(da: &Matrix3<S>) -> [[[[S; 3]; 3]; 3]; 3] {
    let mut dg = [[[[S::zero(); 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                for k in 0..3 {
                    let mut v = S::zero();
                    if i == l {
                        v -= da[(j, k)];
                    }
                    if i == j {
                        v -= da[(l, k)];
                    }
                    if j == l {
                        v += da[(i, k)];
                    }
                    dg[i][j][l][k] = v;
                }
            }
        }
    }
    dg
}

/// Auxiliary coefficients `b_k = a_k - a_dot_k / (2 A)` with
/// `A = sum_k a_k xi^k`; errors when `A` vanishes (the flow derivative of
/// `ln g` is zero and the coefficients are singular).
pub fn b_coefficients<S: Real>(a: &[S; 3], a_dot: &[S; 3], xi: &Vector3<S>) -> Result<[S; 3]> {
    let flow = a[0] * xi[0] + a[1] * xi[1] + a[2] * xi[2];
    if flow.abs().to_f64() < B_SINGULAR_TOL {
        return Err(Error::Numerical(
            "flow derivative of ln g vanishes; auxiliary b coefficients are singular".into(),
        ));
    }
    let two = S::two();
    Ok([
        a[0] - a_dot[0] / (two * flow),
        a[1] - a_dot[1] / (two * flow),
        a[2] - a_dot[2] / (two * flow),
    ])
}

/// Flow derivative of the connection along a trajectory with velocity `xi`,
/// expressed through the auxiliary coefficients:
/// `Gdot^i_jl = -2 A [ d^i_l (a_j - b_j) + d^i_j (a_l - b_l) - d^ip d_jl (a_p - b_p) ]`.
pub fn christoffel_dot<S: Real>(a: &[S; 3], b: &[S; 3], xi: &Vector3<S>) -> Christoffel<S> {
    let flow = a[0] * xi[0] + a[1] * xi[1] + a[2] * xi[2];
    let diff = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let scale = -S::two() * flow;
    let mut g = [[[S::zero(); 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                let mut v = S::zero();
                if i == l {
                    v += diff[j];
                }
                if i == j {
                    v += diff[l];
                }
                if j == l {
                    v -= diff[i];
                }
                g[i][j][l] = scale * v;
            }
        }
    }
    g
}

/// Flow derivative of the connection directly from `a_dot` (the regular form
/// of `christoffel_dot`, valid also where the `b` coefficients are singular).
pub fn christoffel_dot_from_rate<S: Real>(a_dot: &[S; 3]) -> Christoffel<S> {
    let mut g = [[[S::zero(); 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for l in 0..3 {
                let mut v = S::zero();
                if i == l {
                    v -= a_dot[j];
                }
                if i == j {
                    v -= a_dot[l];
                }
                if j == l {
                    v += a_dot[i];
                }
                g[i][j][l] = v;
            }
        }
    }
    g
}

/// Curvature tensor from a connection field and its chart derivatives:
/// `R^i_jkl = dG[i][l][j][k] - dG[i][j][k][l] + G^i_k. G^._lj - G^i_l. G^._jk`.
/// Antisymmetry in the last index pair is enforced structurally (only the
/// `k < l` entries are computed).
pub fn riemann_from_connection<S: Real>(
    gamma: &Christoffel<S>,
    dgamma: &[[[[S; 3]; 3]; 3]; 3],
) -> Riemann<S> {
    let mut r = [[[[S::zero(); 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in (k + 1)..3 {
                    let mut v = dgamma[i][l][j][k] - dgamma[i][j][k][l];
                    for lam in 0..3 {
                        v += gamma[i][k][lam] * gamma[lam][l][j];
                        v -= gamma[i][l][lam] * gamma[lam][j][k];
                    }
                    r[i][j][k][l] = v;
                    r[i][j][l][k] = -v;
                }
            }
        }
    }
    r
}

/// Curvature tensor by central finite differences of a connection field over
/// the chart (step `h` per axis), assembled with the same index combination
/// as `riemann_from_connection`.
pub fn riemann_fd<S, F>(mut gamma_at: F, x0: &Vector3<S>, h: S) -> Result<Riemann<S>>
where
    S: Real,
    F: FnMut(&Vector3<S>) -> Result<Christoffel<S>>,
{
    let center = gamma_at(x0)?;
    let mut dgamma = [[[[S::zero(); 3]; 3]; 3]; 3];
    for k in 0..3 {
        let mut xp = *x0;
        let mut xm = *x0;
        xp[k] += h;
        xm[k] -= h;
        let gp = gamma_at(&xp)?;
        let gm = gamma_at(&xm)?;
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    dgamma[i][j][l][k] = (gp[i][j][l] - gm[i][j][l]) / (S::two() * h);
                }
            }
        }
    }
    Ok(riemann_from_connection(&center, &dgamma))
}

/// Everything the deviation equation needs at one point of a trajectory.
#[derive(Debug, Clone)]
pub struct CurvatureBundle<S: Real> {
    pub a: [S; 3],
    pub a_dot: [S; 3],
    /// `None` where the flow derivative of `ln g` vanishes.
    pub b: Option<[S; 3]>,
    pub lambda_sq: S,
    pub gamma: Christoffel<S>,
    pub gamma_dot: Christoffel<S>,
    pub riemann: Riemann<S>,
}

impl<S: Real> CurvatureBundle<S> {
    /// Assembles the bundle from per-point chart data and the trajectory
    /// velocity. The flow derivative of the connection uses the auxiliary
    /// `b` form where defined and its regular limit otherwise.
    pub fn assemble(g: S, j_total: S, a: [S; 3], da: &Matrix3<S>, xi: &Vector3<S>) -> Self {
        let a_dot = [
            da[(0, 0)] * xi[0] + da[(0, 1)] * xi[1] + da[(0, 2)] * xi[2],
            da[(1, 0)] * xi[0] + da[(1, 1)] * xi[1] + da[(1, 2)] * xi[2],
            da[(2, 0)] * xi[0] + da[(2, 1)] * xi[1] + da[(2, 2)] * xi[2],
        ];
        let b = b_coefficients(&a, &a_dot, xi).ok();
        let gamma = christoffel(&a);
        let gamma_dot = match &b {
            Some(b) => christoffel_dot(&a, b, xi),
            None => christoffel_dot_from_rate(&a_dot),
        };
        let riemann = riemann_from_connection(&gamma, &christoffel_derivatives(da));
        Self { a, a_dot, b, lambda_sq: lambda_sq(g, j_total), gamma, gamma_dot, riemann }
    }
}

/// A conformal factor presented directly over the local chart, with enough
/// derivatives for curvature. Closed-form fields serve as oracles; the
/// co-evolved chart of a real system is the production provider.
pub trait ConformalChart<S: Real> {
    fn factor(&self, x: &Vector3<S>) -> Result<S>;

    /// Log-gradient coefficients `a_i = -(1/2) d ln g / dx^i`.
    fn log_gradient(&self, x: &Vector3<S>) -> Result<[S; 3]>;

    /// Chart derivatives `da[(i, k)] = d a_i / dx^k`.
    fn log_gradient_derivatives(&self, x: &Vector3<S>) -> Result<Matrix3<S>>;
}

/// Constant factor: flat, everything curvature-related vanishes.
#[derive(Debug, Clone, Copy)]
pub struct ConstantFactor<S: Real>(pub S);

impl<S: Real> ConformalChart<S> for ConstantFactor<S> {
    fn factor(&self, _x: &Vector3<S>) -> Result<S> {
        Ok(self.0)
    }

    fn log_gradient(&self, _x: &Vector3<S>) -> Result<[S; 3]> {
        Ok([S::zero(); 3])
    }

    fn log_gradient_derivatives(&self, _x: &Vector3<S>) -> Result<Matrix3<S>> {
        Ok(Matrix3::zeros())
    }
}

/// `g = exp(c . x)`: constant log-gradient, nonflat for nonzero `c`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialFactor<S: Real> {
    pub c: Vector3<S>,
}

impl<S: Real> ConformalChart<S> for ExponentialFactor<S> {
    fn factor(&self, x: &Vector3<S>) -> Result<S> {
        Ok(self.c.dot(x).exp())
    }

    fn log_gradient(&self, _x: &Vector3<S>) -> Result<[S; 3]> {
        let h = S::half();
        Ok([-h * self.c[0], -h * self.c[1], -h * self.c[2]])
    }

    fn log_gradient_derivatives(&self, _x: &Vector3<S>) -> Result<Matrix3<S>> {
        Ok(Matrix3::zeros())
    }
}

/// Smooth polynomial log-factor `ln g = c . x + (1/2) x^T Q x`: spatially
/// varying log-gradient with closed-form derivatives.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticLogFactor<S: Real> {
    pub c: Vector3<S>,
    pub q: Matrix3<S>,
}

impl<S: Real> ConformalChart<S> for QuadraticLogFactor<S> {
    fn factor(&self, x: &Vector3<S>) -> Result<S> {
        Ok((self.c.dot(x) + S::half() * (self.q * x).dot(x)).exp())
    }

    fn log_gradient(&self, x: &Vector3<S>) -> Result<[S; 3]> {
        let grad = self.c + self.q * x;
        let h = S::half();
        Ok([-h * grad[0], -h * grad[1], -h * grad[2]])
    }

    fn log_gradient_derivatives(&self, _x: &Vector3<S>) -> Result<Matrix3<S>> {
        Ok(self.q * (-S::half()))
    }
}

/// Per-point chart data of the co-evolved representation: the factor and its
/// chart derivatives obtained by pulling shape-coordinate derivatives through
/// the gauge-fixed frame field.
#[derive(Debug, Clone)]
pub struct CoevolvedPoint {
    pub g: f64,
    pub frame: FrameSolution<f64>,
    pub a: [f64; 3],
    /// `da[(i, k)] = d a_i / dx^k`.
    pub da: Matrix3<f64>,
}

/// Evaluates chart data at a shape point for a fixed orthogonal gauge. The
/// frame field depends on the shape point only through the factor and the
/// third-coordinate weight, so its chart derivatives are available in closed
/// form given the factor's shape-space derivatives.
pub fn coevolved_point(
    spec: &SystemSpec,
    rho: &[f64; 3],
    gauge: &Matrix3<f64>,
) -> Result<CoevolvedPoint> {
    let g = spec.conformal_factor(rho)?;
    let dg = spec.conformal_gradient(rho);
    let hess = spec.conformal_hessian(rho);
    let gamma33 = (rho[0] / spec.r0) * (rho[0] / spec.r0);
    let frame = FrameSolution::solve(g, gamma33, gauge)?;
    let p = frame.matrix();

    // pi_n = -(1/2) d ln g / d rho_n and its shape derivatives.
    let mut pi = [0.0; 3];
    let mut dpi = [[0.0; 3]; 3]; // dpi[n][q] = d pi_n / d rho_q
    for n in 0..3 {
        pi[n] = -0.5 * dg[n] / g;
        for q in 0..3 {
            dpi[n][q] = -0.5 * (hess[n][q] / g - dg[n] * dg[q] / (g * g));
        }
    }

    // Frame rows P[n][j] = sqrt(g) w_n O[n][j], w = (1, 1, r0/rho_1):
    // shape derivatives of the rows.
    let sq = g.sqrt();
    let w = [1.0, 1.0, spec.r0 / rho[0]];
    let mut dp = [[[0.0; 3]; 3]; 3]; // dp[n][j][q] = d P[n][j] / d rho_q
    for n in 0..3 {
        for j in 0..3 {
            for q in 0..3 {
                let mut v = dg[q] / (2.0 * sq) * w[n] * gauge[(n, j)];
                if n == 2 && q == 0 {
                    v += sq * (-spec.r0 / (rho[0] * rho[0])) * gauge[(n, j)];
                }
                dp[n][j][q] = v;
            }
        }
    }

    let a = frame.pullback_gradient(&pi);

    // d a_j / dx^m = sum_q P[q][m] d/d rho_q (sum_n pi_n P[n][j]).
    let mut da = Matrix3::zeros();
    for j in 0..3 {
        for m in 0..3 {
            let mut v = 0.0;
            for q in 0..3 {
                let mut inner = 0.0;
                for n in 0..3 {
                    inner += dpi[n][q] * p[(n, j)] + pi[n] * dp[n][j][q];
                }
                v += p[(q, m)] * inner;
            }
            da[(j, m)] = v;
        }
    }

    Ok(CoevolvedPoint { g, frame, a, da })
}
