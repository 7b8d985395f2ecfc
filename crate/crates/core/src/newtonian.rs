//! Direct integration of the reduced 12-dimensional system: the imaginary
//! point of mass `mu0` moving in the mass-scaled Jacobi coordinates. This is
//! the ground truth the geodesic representation is checked against.

use crate::error::Error;
use crate::kinematics::potential::pair_distances_physical;
use crate::kinematics::{JacobiState, MassTriple};
use crate::ode::{self, OdeOptions, OdeSolution, Termination};
use crate::system::SystemSpec;
use crate::Result;
use nalgebra::Vector3;

/// Point of the reduced phase space: mass-scaled positions `q = (q_r, q_R)`
/// and their conjugate momenta `p = mu0 dq/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState12 {
    pub q_r: Vector3<f64>,
    pub q_big_r: Vector3<f64>,
    pub p_r: Vector3<f64>,
    pub p_big_r: Vector3<f64>,
    pub t: f64,
}

impl PhaseState12 {
    pub fn from_jacobi(j: &JacobiState<f64>, m: &MassTriple<f64>) -> Self {
        // The mass-normalized Jacobi momenta are exactly the conjugate
        // momenta of the scaled coordinates.
        Self {
            q_r: j.r * m.scale_r(),
            q_big_r: j.big_r * m.scale_big_r(),
            p_r: j.p_r,
            p_big_r: j.p_big_r,
            t: 0.0,
        }
    }

    pub fn to_jacobi(&self, m: &MassTriple<f64>) -> JacobiState<f64> {
        JacobiState {
            r: self.q_r / m.scale_r(),
            big_r: self.q_big_r / m.scale_big_r(),
            p_r: self.p_r,
            p_big_r: self.p_big_r,
        }
    }

    fn from_flat(y: &[f64], t: f64) -> Self {
        Self {
            q_r: Vector3::new(y[0], y[1], y[2]),
            q_big_r: Vector3::new(y[3], y[4], y[5]),
            p_r: Vector3::new(y[6], y[7], y[8]),
            p_big_r: Vector3::new(y[9], y[10], y[11]),
            t,
        }
    }

    fn to_flat(self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[..3].copy_from_slice(self.q_r.as_slice());
        out[3..6].copy_from_slice(self.q_big_r.as_slice());
        out[6..9].copy_from_slice(self.p_r.as_slice());
        out[9..12].copy_from_slice(self.p_big_r.as_slice());
        out
    }

    /// Shape observables `(r, R, theta)` in mass-scaled units.
    pub fn observables(&self) -> (f64, f64, f64) {
        let r = self.q_r.norm();
        let big_r = self.q_big_r.norm();
        let c = (self.q_r.dot(&self.q_big_r) / (r * big_r)).clamp(-1.0, 1.0);
        (r, big_r, c.acos())
    }

    /// Total angular momentum of the reduced system.
    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.q_r.cross(&self.p_r) + self.q_big_r.cross(&self.p_big_r)
    }
}

/// Total potential at a phase-space point (reconstructs the physical pair
/// distances from the scaled vectors).
pub fn potential_at(state: &PhaseState12, spec: &SystemSpec) -> Result<f64> {
    let m = &spec.masses;
    let r_phys = state.q_r / m.scale_r();
    let big_r_phys = state.q_big_r / m.scale_big_r();
    let r = r_phys.norm();
    let big_r = big_r_phys.norm();
    if !(big_r > 0.0) {
        return Err(Error::CoincidentBodies(big_r));
    }
    let c = if r > 0.0 { (r_phys.dot(&big_r_phys) / (r * big_r)).clamp(-1.0, 1.0) } else { 0.0 };
    let (d12, d13, d23) = pair_distances_physical(m, r, big_r, c);
    for d in [d12, d13, d23] {
        if !(d > 0.0) {
            return Err(Error::CoincidentBodies(d));
        }
    }
    Ok(spec.potential.v_bar(d12, d13, d23))
}

/// One-particle Hamiltonian `|p|^2 / (2 mu0) + V`.
pub fn hamiltonian(state: &PhaseState12, spec: &SystemSpec) -> Result<f64> {
    let kinetic =
        (state.p_r.norm_squared() + state.p_big_r.norm_squared()) / (2.0 * spec.masses.mu0);
    Ok(kinetic + potential_at(state, spec)?)
}

/// Canonical Poisson bracket of two phase functions, by central finite
/// differences with step `max(1e-6, 1e-8 |state|)` per coordinate.
pub fn poisson_bracket<F, G>(f: F, g: G, at: &PhaseState12, _spec: &SystemSpec) -> f64
where
    F: Fn(&PhaseState12) -> f64,
    G: Fn(&PhaseState12) -> f64,
{
    let flat = at.to_flat();
    let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = (1e-8 * norm).max(1e-6);
    let eval = |y: &[f64; 12], func: &dyn Fn(&PhaseState12) -> f64| func(&PhaseState12::from_flat(y, at.t));
    let partial = |func: &dyn Fn(&PhaseState12) -> f64, idx: usize| {
        let mut yp = flat;
        let mut ym = flat;
        yp[idx] += h;
        ym[idx] -= h;
        (eval(&yp, func) - eval(&ym, func)) / (2.0 * h)
    };
    let mut sum = 0.0;
    for alpha in 0..6 {
        sum += partial(&f, alpha) * partial(&g, alpha + 6) - partial(&f, alpha + 6) * partial(&g, alpha);
    }
    sum
}

fn force(y: &[f64], spec: &SystemSpec, out: &mut [f64; 6]) -> Result<()> {
    let m = &spec.masses;
    let cr = 1.0 / m.scale_r();
    let c_big_r = 1.0 / m.scale_big_r();
    let r_phys = Vector3::new(y[0], y[1], y[2]) * cr;
    let big_r_phys = Vector3::new(y[3], y[4], y[5]) * c_big_r;
    let v12 = r_phys - big_r_phys * m.lambda_minus;
    let v13 = r_phys + big_r_phys * m.lambda_plus;
    let d12 = v12.norm();
    let d13 = v13.norm();
    let d23 = big_r_phys.norm();
    for d in [d12, d13, d23] {
        if !(d > 0.0) {
            return Err(Error::CoincidentBodies(d));
        }
    }
    let f12 = spec.potential.v12.derivative(d12);
    let f13 = spec.potential.v13.derivative(d13);
    let f23 = spec.potential.v23.derivative(d23);
    let u12 = v12 / d12;
    let u13 = v13 / d13;
    let u23 = big_r_phys / d23;
    // Gradient of V with respect to the scaled coordinates.
    let g_r = (u12 * f12 + u13 * f13) * cr;
    let g_big_r = (u12 * (-m.lambda_minus * f12) + u13 * (m.lambda_plus * f13) + u23 * f23) * c_big_r;
    out[..3].copy_from_slice((-g_r).as_slice());
    out[3..6].copy_from_slice((-g_big_r).as_slice());
    Ok(())
}

/// Which discrete scheme drives the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    /// Adaptive embedded Runge-Kutta with dense output.
    Adaptive { rtol: f64, atol: f64 },
    /// Fixed-step symplectic leapfrog on the separable Hamiltonian.
    Leapfrog { dt: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Self::Adaptive { rtol: 1e-12, atol: 1e-12 }
    }
}

/// Sampled trajectory with conservation diagnostics.
#[derive(Debug, Clone)]
pub struct NewtonTrajectory {
    pub states: Vec<PhaseState12>,
    pub energy0: f64,
    pub max_energy_drift: f64,
    pub max_momentum_drift: f64,
    solution: Option<OdeSolution>,
}

impl NewtonTrajectory {
    /// Dense-sampled state at `t` (adaptive runs only; leapfrog runs fall
    /// back to the nearest stored node).
    pub fn sample(&self, t: f64) -> PhaseState12 {
        match &self.solution {
            Some(sol) => PhaseState12::from_flat(&sol.sample(t), t),
            None => {
                let idx = self
                    .states
                    .binary_search_by(|s| s.t.total_cmp(&t))
                    .unwrap_or_else(|i| i.min(self.states.len() - 1));
                self.states[idx]
            }
        }
    }

    pub fn t_end(&self) -> f64 {
        self.states.last().map(|s| s.t).unwrap_or(0.0)
    }
}

/// Integrate the reduced system to `t_end`.
pub fn integrate_newton(
    s0: &PhaseState12,
    spec: &SystemSpec,
    t_end: f64,
    method: Integrator,
) -> Result<NewtonTrajectory> {
    let e0 = hamiltonian(s0, spec)?;
    let j0 = s0.angular_momentum();
    let mu0 = spec.masses.mu0;

    let states: Vec<PhaseState12>;
    let mut solution = None;
    match method {
        Integrator::Adaptive { rtol, atol } => {
            let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                let mut f = [0.0; 6];
                force(y, spec, &mut f)?;
                for i in 0..6 {
                    dy[i] = y[i + 6] / mu0;
                    dy[i + 6] = f[i];
                }
                Ok(())
            };
            let sol = ode::integrate(
                rhs,
                &s0.to_flat(),
                (s0.t, t_end),
                &OdeOptions { rtol, atol, ..Default::default() },
                None,
                None,
            )?;
            debug_assert_eq!(sol.termination, Termination::Reached);
            states = sol
                .s
                .iter()
                .zip(sol.y.iter())
                .map(|(t, y)| PhaseState12::from_flat(y, *t))
                .collect();
            solution = Some(sol);
        }
        Integrator::Leapfrog { dt } => {
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument("leapfrog step must be positive".into()));
            }
            let mut y = s0.to_flat();
            let mut t = s0.t;
            let mut out = vec![PhaseState12::from_flat(&y, t)];
            let mut f = [0.0; 6];
            force(&y, spec, &mut f)?;
            let n_steps = ((t_end - s0.t) / dt).ceil() as usize;
            for _ in 0..n_steps {
                let h = dt.min(t_end - t);
                if h <= 0.0 {
                    break;
                }
                for i in 0..6 {
                    y[i + 6] += 0.5 * h * f[i];
                    y[i] += h * y[i + 6] / mu0;
                }
                force(&y, spec, &mut f)?;
                for i in 0..6 {
                    y[i + 6] += 0.5 * h * f[i];
                }
                t += h;
                out.push(PhaseState12::from_flat(&y, t));
            }
            states = out;
        }
    }

    // Conservation audit over the stored nodes.
    let mut max_energy = 0.0f64;
    let mut max_mom = 0.0f64;
    let e_scale = e0.abs().max(1e-12);
    let j_scale = j0.norm().max(1e-12);
    for st in &states {
        let e = hamiltonian(st, spec)?;
        max_energy = max_energy.max((e - e0).abs() / e_scale);
        max_mom = max_mom.max((st.angular_momentum() - j0).norm() / j_scale);
    }

    Ok(NewtonTrajectory {
        states,
        energy0: e0,
        max_energy_drift: max_energy,
        max_momentum_drift: max_mom,
        solution,
    })
}

/// The same state with reversed momenta (time-reversal of the flow).
pub fn reverse_momenta(state: &PhaseState12) -> PhaseState12 {
    PhaseState12 { p_r: -state.p_r, p_big_r: -state.p_big_r, t: 0.0, ..*state }
}
