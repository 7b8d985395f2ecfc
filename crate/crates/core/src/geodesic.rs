//! The reduced geodesic representation: six first-order shape equations plus
//! exactly integrable orientation equations, integrated in the arc-length
//! parameter with the shape point and orientation angles co-evolved through
//! per-step frame solutions, and reparameterized back to ordinary time for
//! comparison against the direct Newtonian integration.

use crate::error::Error;
use crate::frames::{ExternalFrameSolution, FrameSolution};
use crate::kinematics::{gamma_metric, vectors_to_hyperspherical, HypersphericalState};
use crate::manifold::lambda_sq;
use crate::newtonian::{NewtonTrajectory, PhaseState12};
use crate::ode::{self, Guard, OdeOptions, OdeSolution, Termination};
use crate::system::SystemSpec;
use crate::Result;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

/// Gauge selection for the frame solutions along a trajectory.
#[derive(Debug, Clone)]
pub enum GaugePolicy {
    /// Identity gauge held for the whole run (the default "diagonal" choice).
    Identity,
    /// A fixed orthogonal gauge held for the whole run.
    Fixed(Matrix3<f64>),
    /// A fresh uniformly random gauge every `segment_len` of arc length
    /// (the controlled experiment for gauge sensitivity).
    PerSegmentRandom { seed: u64, segment_len: f64 },
}

impl GaugePolicy {
    fn segment_matrix(&self, segment: usize) -> Matrix3<f64> {
        match self {
            Self::Identity => Matrix3::identity(),
            Self::Fixed(o) => *o,
            Self::PerSegmentRandom { seed, .. } => {
                let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(segment as u64));
                let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                    rng.gen::<f64>() * 2.0 - 1.0,
                ));
                q.to_rotation_matrix().into_inner()
            }
        }
    }

    fn segment_len(&self) -> Option<f64> {
        match self {
            Self::PerSegmentRandom { segment_len, .. } => Some(*segment_len),
            _ => None,
        }
    }
}

/// Full state of the geodesic-side representation.
#[derive(Debug, Clone, Copy)]
pub struct InternalState {
    /// Local-chart shape coordinates (origin is arbitrary per trajectory).
    pub x: Vector3<f64>,
    /// Shape velocities `dx/ds`.
    pub xi: Vector3<f64>,
    /// Co-evolved shape coordinates `(r, R, r0 theta)`.
    pub rho: [f64; 3],
    /// Co-evolved orientation angles `(Theta, Phi, Psi)`, unwrapped.
    pub angles: [f64; 3],
    /// Local-chart orientation coordinates.
    pub x_ext: Vector3<f64>,
    /// Orientation velocities (first integrals up to integration error).
    pub xi_ext: Vector3<f64>,
    /// Arc-length parameter.
    pub s: f64,
    /// Accumulated ordinary time.
    pub t: f64,
}

const DIM: usize = 19;

impl InternalState {
    fn to_flat(self) -> [f64; DIM] {
        let mut y = [0.0; DIM];
        y[..3].copy_from_slice(self.x.as_slice());
        y[3..6].copy_from_slice(self.xi.as_slice());
        y[6..9].copy_from_slice(&self.rho);
        y[9..12].copy_from_slice(&self.angles);
        y[12..15].copy_from_slice(self.x_ext.as_slice());
        y[15..18].copy_from_slice(self.xi_ext.as_slice());
        y[18] = self.t;
        y
    }

    fn from_flat(y: &[f64], s: f64) -> Self {
        Self {
            x: Vector3::new(y[0], y[1], y[2]),
            xi: Vector3::new(y[3], y[4], y[5]),
            rho: [y[6], y[7], y[8]],
            angles: [y[9], y[10], y[11]],
            x_ext: Vector3::new(y[12], y[13], y[14]),
            xi_ext: Vector3::new(y[15], y[16], y[17]),
            s,
            t: y[18],
        }
    }

    /// Shape observables `(r, R, theta)` of the co-evolved point.
    pub fn observables(&self, spec: &SystemSpec) -> (f64, f64, f64) {
        (self.rho[0], self.rho[1], self.rho[2] / spec.r0)
    }

    /// State with reversed velocities (retraces the path; for specs with
    /// nonzero angular integrals the integrals must be negated alongside).
    pub fn reversed(&self) -> Self {
        Self { xi: -self.xi, xi_ext: -self.xi_ext, s: 0.0, t: 0.0, ..*self }
    }

    /// Builds the geodesic-side initial state from a Newtonian phase point:
    /// the shape velocity direction is taken from the Newtonian rates and
    /// rescaled onto the energy shell.
    pub fn from_phase(state: &PhaseState12, spec: &SystemSpec) -> Result<Self> {
        let h = vectors_to_hyperspherical(state.q_r, state.q_big_r, spec.r0)?;
        let rho = [h.r, h.big_r, spec.r0 * h.theta];
        let g = spec.conformal_factor(&rho)?;
        let gamma33 = (rho[0] / spec.r0).powi(2);
        let frame = FrameSolution::solve(g, gamma33, &Matrix3::identity())?;

        // Shape-coordinate rates from the Newtonian velocities.
        let v_r = state.p_r / spec.masses.mu0;
        let v_big_r = state.p_big_r / spec.masses.mu0;
        let r = h.r;
        let big_r = h.big_r;
        let r_dot = state.q_r.dot(&v_r) / r;
        let big_r_dot = state.q_big_r.dot(&v_big_r) / big_r;
        let cos_th = (state.q_r.dot(&state.q_big_r) / (r * big_r)).clamp(-1.0, 1.0);
        let sin_th = (1.0 - cos_th * cos_th).sqrt();
        if sin_th < 1e-12 {
            return Err(Error::Degenerate(
                "collinear shape: the pair angle rate is undefined".into(),
            ));
        }
        let dcos = (v_r.dot(&state.q_big_r) + state.q_r.dot(&v_big_r)) / (r * big_r)
            - cos_th * (r_dot / r + big_r_dot / big_r);
        let theta_dot = -dcos / sin_th;
        let drho_dt = Vector3::new(r_dot, big_r_dot, spec.r0 * theta_dot);

        let dir = frame
            .matrix()
            .try_inverse()
            .ok_or_else(|| Error::FrameDegenerate("frame not invertible".into()))?
            * drho_dt;
        let dir_norm = dir.norm();
        if dir_norm < 1e-14 {
            return Err(Error::Degenerate(
                "vanishing shape velocity: the shell normalization direction is undefined".into(),
            ));
        }
        let shell = spec.energy_shell();
        let lam2 = lambda_sq(g, spec.j_total());
        let speed_sq = 2.0 * shell / g - lam2;
        if speed_sq <= 0.0 {
            return Err(Error::Degenerate(format!(
                "energy shell admits no shape motion here (2H/g - L^2 = {speed_sq:.3e})"
            )));
        }
        let xi = dir * (speed_sq.sqrt() / dir_norm);
        let xi_ext = Vector3::from_iterator(spec.j_integrals.iter().map(|j| j / g));

        Ok(Self {
            x: Vector3::zeros(),
            xi,
            rho,
            angles: [h.cap_theta, h.cap_phi, h.cap_psi],
            x_ext: Vector3::zeros(),
            xi_ext,
            s: 0.0,
            t: state.t,
        })
    }
}

/// Orientation velocities from the first integrals: `dx^m/ds = J_m / g`.
pub fn external_rates(g: f64, j_integrals: &[f64; 3]) -> [f64; 3] {
    [j_integrals[0] / g, j_integrals[1] / g, j_integrals[2] / g]
}

/// Reduced Hamiltonian `(g/2)(|xi|^2 + (J/g)^2)`.
pub fn reduced_hamiltonian(g: f64, xi: &Vector3<f64>, spec: &SystemSpec) -> f64 {
    0.5 * g * (xi.norm_squared() + lambda_sq(g, spec.j_total()))
}

/// Right side of the six shape equations:
/// `dxi^i/ds = a_i (2 xi_i^2 - |xi|^2 - L^2) + 2 xi_i (a.xi - a_i xi_i)`.
pub fn shape_acceleration(a: &[f64; 3], xi: &Vector3<f64>, lam2: f64) -> Vector3<f64> {
    let s2 = xi.norm_squared();
    let a_dot_xi = a[0] * xi[0] + a[1] * xi[1] + a[2] * xi[2];
    Vector3::from_fn(|i, _| {
        a[i] * (2.0 * xi[i] * xi[i] - s2 - lam2) + 2.0 * xi[i] * (a_dot_xi - a[i] * xi[i])
    })
}

/// One evaluation of the full co-evolved right side.
fn rhs_eval(spec: &SystemSpec, gauge: &Matrix3<f64>, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let rho = [y[6], y[7], y[8]];
    if !(rho[0] > 0.0) || !(rho[1] > 0.0) {
        return Err(Error::Degenerate("shape lengths must stay positive".into()));
    }
    let g = spec.conformal_factor(&rho)?;
    let gamma33 = (rho[0] / spec.r0).powi(2);
    let frame = FrameSolution::solve(g, gamma33, gauge)?;
    let pi = spec.pi_coefficients(&rho)?;
    let a = frame.pullback_gradient(&pi);
    let xi = Vector3::new(y[3], y[4], y[5]);
    let lam2 = lambda_sq(g, spec.j_total());

    let dxi = shape_acceleration(&a, &xi, lam2);
    let drho = frame.differential_map(&xi);

    // dx/ds = xi.
    dy[0] = xi[0];
    dy[1] = xi[1];
    dy[2] = xi[2];
    dy[3] = dxi[0];
    dy[4] = dxi[1];
    dy[5] = dxi[2];
    dy[6] = drho[0];
    dy[7] = drho[1];
    dy[8] = drho[2];

    if spec.j_total() > 0.0 {
        let h = HypersphericalState {
            r: rho[0],
            big_r: rho[1],
            theta: rho[2] / spec.r0,
            cap_theta: y[9],
            cap_phi: y[10],
            cap_psi: y[11],
            r0: spec.r0,
        };
        let ext = gamma_metric(&h).external_block();
        let ef = ExternalFrameSolution::solve(g, &ext, gauge)?;
        let xi_ext = Vector3::new(y[15], y[16], y[17]);
        let drho_ext = ef.differential_map(&xi_ext);
        let a_dot_xi = a[0] * xi[0] + a[1] * xi[1] + a[2] * xi[2];
        for m in 0..3 {
            dy[9 + m] = drho_ext[m] / spec.r0;
            dy[12 + m] = xi_ext[m];
            // Second-order orientation equations, whose first integrals are
            // g xi_ext = J.
            dy[15 + m] = 2.0 * xi_ext[m] * a_dot_xi;
        }
    } else {
        for m in 0..3 {
            dy[9 + m] = 0.0;
            dy[12 + m] = 0.0;
            dy[15 + m] = 0.0;
        }
    }

    // Ordinary-time rate on the energy shell.
    let e_minus_u = g * spec.u0;
    dy[18] = (spec.masses.mu0 * spec.energy_shell() / e_minus_u).sqrt();

    Ok(())
}

/// Per-node diagnostics of an integrated geodesic.
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicSample {
    pub s: f64,
    pub t: f64,
    pub x: [f64; 3],
    pub xi: [f64; 3],
    pub rho: [f64; 3],
    pub angles: [f64; 3],
    pub g: f64,
    pub hamiltonian: f64,
    pub j_residual: f64,
    pub line_element_residual: f64,
    pub frame_residual: f64,
    pub sphere_residual: Option<f64>,
}

/// Aggregated audits over all accepted nodes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct GeodesicAudits {
    pub max_shell_drift: f64,
    pub max_j_residual: f64,
    pub max_line_element_residual: f64,
    pub max_frame_residual: f64,
    pub max_sphere_residual: f64,
    pub sphere_nodes_checked: usize,
}

/// Shape-frame coefficients recorded along the run.
#[derive(Debug, Clone, Serialize)]
pub struct FrameTraceRow {
    pub s: f64,
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub gamma: [f64; 3],
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GeodesicOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h0: Option<f64>,
    /// Largest allowed relative change of the conformal factor per step.
    pub g_change_cap: f64,
    pub record_frames: bool,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-12,
            max_steps: 2_000_000,
            h0: None,
            g_change_cap: 0.05,
            record_frames: false,
        }
    }
}

/// How far to integrate.
#[derive(Debug, Clone, Copy)]
pub enum Horizon {
    ArcLength(f64),
    /// Integrate until the accumulated ordinary time reaches this value.
    Time(f64),
}

/// An integrated geodesic with dense output and audits.
#[derive(Debug, Clone)]
pub struct GeodesicTrajectory {
    pub samples: Vec<GeodesicSample>,
    pub shell: f64,
    pub audits: GeodesicAudits,
    pub frame_trace: Option<Vec<FrameTraceRow>>,
    segments: Vec<(f64, Matrix3<f64>, OdeSolution)>,
}

impl GeodesicTrajectory {
    pub fn s_end(&self) -> f64 {
        self.samples.last().map(|s| s.s).unwrap_or(0.0)
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    /// Dense-sampled state at arc length `s`.
    pub fn sample(&self, s: f64) -> InternalState {
        let idx = self
            .segments
            .iter()
            .position(|(start, _, sol)| s >= *start && s <= sol.s.last().copied().unwrap_or(*start))
            .unwrap_or(self.segments.len() - 1);
        InternalState::from_flat(&self.segments[idx].2.sample(s), s)
    }

    /// Dense-sampled state at ordinary time `t` (bisection on the monotone
    /// accumulated time).
    pub fn sample_at_time(&self, t: f64) -> Result<InternalState> {
        let (s_lo, s_hi) = (self.samples.first().unwrap().s, self.s_end());
        let (t_lo, t_hi) = (self.samples.first().unwrap().t, self.t_end());
        if t < t_lo - 1e-12 || t > t_hi + 1e-12 {
            return Err(Error::Incomparable(format!(
                "time {t} outside the integrated range [{t_lo}, {t_hi}]"
            )));
        }
        let mut lo = s_lo;
        let mut hi = s_hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.sample(mid).t < t {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * s_hi.abs().max(1.0) {
                break;
            }
        }
        Ok(self.sample(0.5 * (lo + hi)))
    }
}

/// Integrates the co-evolved geodesic system.
pub fn integrate_geodesic(
    init: &InternalState,
    spec: &SystemSpec,
    gauge: &GaugePolicy,
    horizon: Horizon,
    opts: &GeodesicOptions,
) -> Result<GeodesicTrajectory> {
    let shell = spec.energy_shell();
    let (s_total, t_target) = match horizon {
        Horizon::ArcLength(s) => (s, None),
        // Conservative arc-length cap for a time target; the event stops us.
        Horizon::Time(t) => {
            let g0 = spec.conformal_factor(&init.rho)?;
            let rate0 = (spec.masses.mu0 * shell / (g0 * spec.u0)).sqrt();
            (1e4 * (t / rate0).max(1.0), Some(t))
        }
    };

    let seg_len = gauge.segment_len().unwrap_or(s_total).max(1e-9);
    let mut segments = Vec::new();
    let mut samples = Vec::new();
    let mut frame_trace = if opts.record_frames { Some(Vec::new()) } else { None };
    let mut audits = GeodesicAudits::default();

    let mut y = init.to_flat().to_vec();
    let mut s = init.s;
    let mut seg_index = 0usize;
    let mut finished = false;

    // Audit and record one accepted node.
    let record = |s: f64,
                      y: &[f64],
                      audits: &mut GeodesicAudits,
                      samples: &mut Vec<GeodesicSample>,
                      frame_trace: &mut Option<Vec<FrameTraceRow>>,
                      gauge_m: &Matrix3<f64>|
     -> Result<()> {
        let st = InternalState::from_flat(y, s);
        let g = spec.conformal_factor(&st.rho)?;
        let gamma33 = (st.rho[0] / spec.r0).powi(2);
        let frame = FrameSolution::solve(g, gamma33, gauge_m)?;
        let h = reduced_hamiltonian(g, &st.xi, spec);
        let shell_drift = (h - shell).abs() / shell.abs().max(1e-300);
        let j_res = if spec.j_total() > 0.0 {
            (0..3)
                .map(|m| (g * st.xi_ext[m] - spec.j_integrals[m]).abs())
                .fold(0.0f64, f64::max)
        } else {
            st.xi_ext.norm()
        };
        let line_res = frame.line_element_residual(&st.xi).abs();
        let sphere_res = crate::frames::sphere_form(&frame)
            .ok()
            .map(|sf| sf.unit_norm_residual());
        audits.max_shell_drift = audits.max_shell_drift.max(shell_drift);
        audits.max_j_residual = audits.max_j_residual.max(j_res);
        audits.max_line_element_residual = audits.max_line_element_residual.max(line_res);
        audits.max_frame_residual = audits.max_frame_residual.max(frame.residual);
        if let Some(r) = sphere_res {
            audits.max_sphere_residual = audits.max_sphere_residual.max(r);
            audits.sphere_nodes_checked += 1;
        }
        if let Some(tr) = frame_trace.as_mut() {
            tr.push(FrameTraceRow {
                s,
                alpha: frame.alpha,
                beta: frame.beta,
                gamma: frame.gamma,
                residual: frame.residual,
            });
        }
        samples.push(GeodesicSample {
            s,
            t: st.t,
            x: [st.x[0], st.x[1], st.x[2]],
            xi: [st.xi[0], st.xi[1], st.xi[2]],
            rho: st.rho,
            angles: st.angles,
            g,
            hamiltonian: h,
            j_residual: j_res,
            line_element_residual: line_res,
            frame_residual: frame.residual,
            sphere_residual: sphere_res,
        });
        Ok(())
    };

    let gauge_m0 = gauge.segment_matrix(0);
    record(s, &y, &mut audits, &mut samples, &mut frame_trace, &gauge_m0)?;

    while !finished && s < init.s + s_total - 1e-12 {
        let gauge_m = gauge.segment_matrix(seg_index);
        let seg_end = (s + seg_len).min(init.s + s_total);

        let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            rhs_eval(spec, &gauge_m, y, dy)
        };
        let mut guard_fn = |_s: f64, y0: &[f64], y1: &[f64]| -> Guard {
            let g0 = spec.conformal_factor(&[y0[6], y0[7], y0[8]]);
            let g1 = spec.conformal_factor(&[y1[6], y1[7], y1[8]]);
            match (g0, g1) {
                (Ok(g0), Ok(g1)) => {
                    if (g1 - g0).abs() / g0 > opts.g_change_cap {
                        Guard::Shrink
                    } else {
                        Guard::Accept
                    }
                }
                _ => Guard::Shrink,
            }
        };
        let event_holder;
        let event: Option<&dyn Fn(f64, &[f64]) -> f64> = match t_target {
            Some(tt) => {
                event_holder = move |_s: f64, y: &[f64]| y[18] - tt;
                Some(&event_holder)
            }
            None => None,
        };

        let sol = ode::integrate(
            rhs,
            &y,
            (s, seg_end),
            &OdeOptions {
                rtol: opts.rtol,
                atol: opts.atol,
                h0: opts.h0,
                h_max: None,
                max_steps: opts.max_steps,
            },
            Some(&mut guard_fn),
            event,
        )?;

        for (node_s, node_y) in sol.s.iter().zip(sol.y.iter()).skip(1) {
            record(*node_s, node_y, &mut audits, &mut samples, &mut frame_trace, &gauge_m)?;
        }
        let (last_s, last_y) = sol.last();
        s = *last_s;
        y = last_y.to_vec();
        if let Termination::Event(_) = sol.termination {
            finished = true;
        }
        segments.push((sol.s[0], gauge_m, sol));
        seg_index += 1;
        if t_target.is_none() && s >= init.s + s_total - 1e-12 {
            finished = true;
        }
        if seg_index > 1_000_000 {
            return Err(Error::StepLimit(seg_index));
        }
    }

    Ok(GeodesicTrajectory { samples, shell, audits, frame_trace, segments })
}

/// Accumulated ordinary time over `(s, g)` samples by trapezoidal quadrature
/// of the shell-consistent rate.
pub fn reparameterize_time(s: &[f64], g: &[f64], spec: &SystemSpec) -> Result<Vec<f64>> {
    if s.len() != g.len() || s.is_empty() {
        return Err(Error::InvalidArgument("mismatched or empty sample arrays".into()));
    }
    let shell = spec.energy_shell();
    let rate = |gv: f64| -> Result<f64> {
        if !(gv > 0.0) {
            return Err(Error::ForbiddenRegion(gv));
        }
        Ok((spec.masses.mu0 * shell / (gv * spec.u0)).sqrt())
    };
    let mut t = Vec::with_capacity(s.len());
    t.push(0.0);
    for i in 1..s.len() {
        let ds = s[i] - s[i - 1];
        if ds <= 0.0 {
            return Err(Error::InvalidArgument("arc-length samples must increase".into()));
        }
        let avg = 0.5 * (rate(g[i - 1])? + rate(g[i])?);
        let prev = *t.last().unwrap();
        t.push(prev + avg * ds);
    }
    Ok(t)
}

/// Relative deviations of the shape observables between the two
/// representations over their common time range.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub n_samples: usize,
    pub t_range: (f64, f64),
    pub max_rel: [f64; 3],
    pub rms_rel: [f64; 3],
    pub max_rel_overall: f64,
}

/// Compares shape observables `(r, R, theta)(t)` of the Newtonian oracle and
/// the geodesic representation on a common time grid.
pub fn equivalence_check(
    newton: &NewtonTrajectory,
    geo: &GeodesicTrajectory,
    spec: &SystemSpec,
    n_samples: usize,
) -> Result<EquivalenceReport> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two comparison samples".into()));
    }
    let t_lo = geo.samples.first().unwrap().t;
    let t_hi = geo.t_end().min(newton.t_end());
    if t_hi <= t_lo {
        return Err(Error::Incomparable("no overlapping time range".into()));
    }
    // Stay strictly inside both ranges.
    let lo = t_lo + 1e-9 * (t_hi - t_lo);
    let hi = t_hi - 1e-9 * (t_hi - t_lo);
    let mut max_rel = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    for k in 0..n_samples {
        let t = lo + (hi - lo) * k as f64 / (n_samples - 1) as f64;
        let ns = newton.sample(t);
        let (rn, bn, thn) = ns.observables();
        let gs = geo.sample_at_time(t)?;
        let (rg, bg, thg) = gs.observables(spec);
        let rel = [
            (rg - rn).abs() / rn.abs().max(1e-12),
            (bg - bn).abs() / bn.abs().max(1e-12),
            (thg - thn).abs() / thn.abs().max(1e-2),
        ];
        for i in 0..3 {
            max_rel[i] = max_rel[i].max(rel[i]);
            sum_sq[i] += rel[i] * rel[i];
        }
    }
    let rms_rel = sum_sq.map(|v| (v / n_samples as f64).sqrt());
    Ok(EquivalenceReport {
        n_samples,
        t_range: (lo, hi),
        max_rel,
        rms_rel,
        max_rel_overall: max_rel.iter().cloned().fold(0.0, f64::max),
    })
}

/// Integrates the on-shell reduced system (one shape velocity eliminated
/// through the energy shell). The eliminated component touches zero
/// tangentially at its turning points, where the on-shell square root has a
/// cusp; the integrator detects the approach, bridges the cusp with a short
/// run of the full system, and resumes the reduced form with the sign the
/// bridge exits with.
pub fn integrate_geodesic_reduced(
    init: &InternalState,
    spec: &SystemSpec,
    s_end: f64,
    opts: &GeodesicOptions,
) -> Result<Vec<(f64, InternalState)>> {
    let shell = spec.energy_shell();
    let gauge = Matrix3::identity();
    let radicand = |y: &[f64]| -> f64 {
        let rho = [y[5], y[6], y[7]];
        match spec.conformal_factor(&rho) {
            Ok(g) => 2.0 * shell / g - lambda_sq(g, spec.j_total()) - y[3] * y[3] - y[4] * y[4],
            Err(_) => -1.0,
        }
    };
    // Detection level for "the eliminated component is about to turn",
    // relative to the local shell speed.
    let g0 = spec.conformal_factor(&init.rho)?;
    let floor = 1e-4 * 2.0 * shell / g0;

    // Reduced state: x(3), xi2, xi3, rho(3), t  (xi1 on the shell).
    let mut sign = init.xi[0].signum();
    if sign == 0.0 {
        sign = 1.0;
    }
    let mut y = vec![
        init.x[0], init.x[1], init.x[2], init.xi[1], init.xi[2], init.rho[0], init.rho[1],
        init.rho[2], init.t,
    ];
    let mut s = init.s;
    let mut out: Vec<(f64, InternalState)> = Vec::new();
    let mut restarts = 0usize;

    let full_rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        // Bridge state: x(3), xi(3), rho(3), t.
        let rho = [y[6], y[7], y[8]];
        let g = spec.conformal_factor(&rho)?;
        let xi = Vector3::new(y[3], y[4], y[5]);
        let gamma33 = (rho[0] / spec.r0).powi(2);
        let frame = FrameSolution::solve(g, gamma33, &gauge)?;
        let pi = spec.pi_coefficients(&rho)?;
        let a = frame.pullback_gradient(&pi);
        let dxi = shape_acceleration(&a, &xi, lambda_sq(g, spec.j_total()));
        let drho = frame.differential_map(&xi);
        dy[..3].copy_from_slice(xi.as_slice());
        dy[3..6].copy_from_slice(dxi.as_slice());
        dy[6..9].copy_from_slice(drho.as_slice());
        dy[9] = (spec.masses.mu0 * shell / (g * spec.u0)).sqrt();
        Ok(())
    };

    while s < s_end - 1e-12 {
        let sgn = sign;
        let rhs = |_s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let rho = [y[5], y[6], y[7]];
            let g = spec.conformal_factor(&rho)?;
            let rad = 2.0 * shell / g - lambda_sq(g, spec.j_total()) - y[3] * y[3] - y[4] * y[4];
            let xi1 = sgn * rad.max(0.0).sqrt();
            let xi = Vector3::new(xi1, y[3], y[4]);
            let gamma33 = (rho[0] / spec.r0).powi(2);
            let frame = FrameSolution::solve(g, gamma33, &gauge)?;
            let pi = spec.pi_coefficients(&rho)?;
            let a = frame.pullback_gradient(&pi);
            let dxi = shape_acceleration(&a, &xi, lambda_sq(g, spec.j_total()));
            let drho = frame.differential_map(&xi);
            dy[0] = xi[0];
            dy[1] = xi[1];
            dy[2] = xi[2];
            dy[3] = dxi[1];
            dy[4] = dxi[2];
            dy[5] = drho[0];
            dy[6] = drho[1];
            dy[7] = drho[2];
            dy[8] = (spec.masses.mu0 * shell / (g * spec.u0)).sqrt();
            Ok(())
        };
        let event = |_s: f64, y: &[f64]| -> f64 { radicand(y) - floor };
        let sol = ode::integrate(
            rhs,
            &y,
            (s, s_end),
            &OdeOptions { rtol: opts.rtol, atol: opts.atol, max_steps: opts.max_steps, ..Default::default() },
            None,
            Some(&event),
        )?;

        // The event catches slow descents; narrow dips the steps jump over
        // are caught by scanning the dense output.
        let mut dip_start: Option<f64> = None;
        'scan: for step in sol.dense.iter() {
            for q in 1..=16 {
                let sq = step.s0 + step.h * q as f64 / 16.0;
                if radicand(&step.eval(sq)) < floor {
                    dip_start = Some(sq);
                    break 'scan;
                }
            }
        }
        if let Termination::Event(se) = sol.termination {
            dip_start = Some(dip_start.map_or(se, |d| d.min(se)));
        }

        let take_until = dip_start.unwrap_or(f64::INFINITY);
        let skip = usize::from(!out.is_empty());
        for (node_s, node_y) in sol.s.iter().zip(sol.y.iter()).skip(skip) {
            if *node_s > take_until {
                break;
            }
            let rad = radicand(node_y);
            let xi1 = sign * rad.max(0.0).sqrt();
            out.push((
                *node_s,
                InternalState {
                    x: Vector3::new(node_y[0], node_y[1], node_y[2]),
                    xi: Vector3::new(xi1, node_y[3], node_y[4]),
                    rho: [node_y[5], node_y[6], node_y[7]],
                    angles: init.angles,
                    x_ext: Vector3::zeros(),
                    xi_ext: Vector3::zeros(),
                    s: *node_s,
                    t: node_y[8],
                },
            ));
        }

        match dip_start {
            None => break,
            Some(sq) => {
                // Bridge the cusp with the full system from the cut point.
                let yq = sol.sample(sq.min(*sol.s.last().unwrap()));
                let rad = radicand(&yq).max(0.0);
                let bridge0 = [
                    yq[0], yq[1], yq[2],
                    sign * rad.sqrt(), yq[3], yq[4],
                    yq[5], yq[6], yq[7],
                    yq[8],
                ];
                // Resume once the reduced-form radicand is comfortably
                // positive again.
                let bridge_event = |_s: f64, by: &[f64]| -> f64 {
                    let rho = [by[6], by[7], by[8]];
                    match spec.conformal_factor(&rho) {
                        Ok(g) => {
                            2.0 * shell / g
                                - lambda_sq(g, spec.j_total())
                                - by[4] * by[4]
                                - by[5] * by[5]
                                - 1.5 * floor
                        }
                        Err(_) => -1.0,
                    }
                };
                let bsol = ode::integrate(
                    full_rhs,
                    &bridge0,
                    (sq, s_end),
                    &OdeOptions {
                        rtol: opts.rtol,
                        atol: opts.atol,
                        max_steps: opts.max_steps,
                        ..Default::default()
                    },
                    None,
                    Some(&bridge_event),
                )?;
                let (bs, by) = bsol.last();
                match bsol.termination {
                    Termination::Event(_) => {
                        sign = by[3].signum();
                        if sign == 0.0 {
                            sign = -sgn;
                        }
                        s = *bs;
                        y = vec![by[0], by[1], by[2], by[4], by[5], by[6], by[7], by[8], by[9]];
                    }
                    Termination::Reached => {
                        // The bridge ran out the whole span.
                        out.push((
                            *bs,
                            InternalState {
                                x: Vector3::new(by[0], by[1], by[2]),
                                xi: Vector3::new(by[3], by[4], by[5]),
                                rho: [by[6], by[7], by[8]],
                                angles: init.angles,
                                x_ext: Vector3::zeros(),
                                xi_ext: Vector3::zeros(),
                                s: *bs,
                                t: by[9],
                            },
                        ));
                        break;
                    }
                }
                restarts += 1;
                if restarts > 10_000 {
                    return Err(Error::StepLimit(restarts));
                }
            }
        }
    }
    Ok(out)
}
