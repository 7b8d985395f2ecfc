//! Stochastic layer: white-noise generation with the delta-correlation
//! normalization, the two Langevin steppers (additive phase-space noise and
//! multiplicative metric-fluctuation noise), and seeded ensemble simulation
//! with density estimation.

pub mod density;
pub mod fokker_planck;
pub mod rng;

pub use density::{Axis, EnsembleDensity};
pub use rng::{CounterRng, PathRng};

use crate::error::Error;
use crate::frames::FrameSolution;
use crate::geodesic::{shape_acceleration, InternalState};
use crate::manifold::lambda_sq;
use crate::system::SystemSpec;
use crate::Result;
use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

/// Fluctuation power: one scalar for the additive phase-space forcing, or a
/// symmetric positive-semidefinite matrix for the metric-fluctuation forcing.
#[derive(Debug, Clone)]
pub enum NoisePower {
    Scalar(f64),
    Matrix(Matrix3<f64>),
}

/// Which components of the phase-space system receive noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseWiring {
    /// Noise on all six components as printed (default).
    AllComponents,
    /// Noise only on the velocity components.
    MomentumOnly,
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub power: NoisePower,
    pub seed: u64,
    /// Parameter step of the Euler-Maruyama discretization.
    pub step: f64,
    pub wiring: NoiseWiring,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::InvalidNoise(format!("step must be positive, got {}", self.step)));
        }
        match &self.power {
            NoisePower::Scalar(e) => {
                if *e < 0.0 || !e.is_finite() {
                    return Err(Error::InvalidNoise(format!("power must be >= 0, got {e}")));
                }
            }
            NoisePower::Matrix(m) => {
                let asym = (m - m.transpose()).abs().max();
                if asym > 1e-12 {
                    return Err(Error::InvalidNoise("power matrix must be symmetric".into()));
                }
                let eig = nalgebra::SymmetricEigen::new(*m);
                if eig.eigenvalues.min() < -1e-12 {
                    return Err(Error::InvalidNoise(
                        "power matrix must be positive semidefinite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Scalar power (the matrix case reports its largest eigenvalue).
    pub fn scalar_power(&self) -> f64 {
        match &self.power {
            NoisePower::Scalar(e) => *e,
            NoisePower::Matrix(m) => nalgebra::SymmetricEigen::new(*m).eigenvalues.max(),
        }
    }

    /// Transform taking i.i.d. standard normals to increments with
    /// covariance `2 power step` (matrix case: `2 eps_ij step`).
    fn increment_transform(&self) -> Result<Matrix3<f64>> {
        match &self.power {
            NoisePower::Scalar(e) => Ok(Matrix3::identity() * (2.0 * e * self.step).sqrt()),
            NoisePower::Matrix(m) => {
                // Symmetric square root (tolerates semidefinite matrices).
                let eig = nalgebra::SymmetricEigen::new(*m);
                let vals = eig.eigenvalues.map(|v| (v.max(0.0) * 2.0 * self.step).sqrt());
                Ok(&eig.eigenvectors * Matrix3::from_diagonal(&vals) * eig.eigenvectors.transpose())
            }
        }
    }
}

/// Scalar white-noise increments: `n` draws with mean zero and variance
/// `2 power step` (the discretized delta correlation), from path 0 of the
/// counter generator.
pub fn white_noise(spec: &NoiseSpec, n: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let e = match &spec.power {
        NoisePower::Scalar(e) => *e,
        NoisePower::Matrix(_) => {
            return Err(Error::InvalidNoise("scalar increments need scalar power".into()))
        }
    };
    let sd = (2.0 * e * spec.step).sqrt();
    let rng = CounterRng::new(spec.seed);
    let mut path = rng.path(0);
    let mut out = vec![0.0; n];
    let mut buf = [0.0; 8];
    for (i, chunk) in out.chunks_mut(8).enumerate() {
        path.normals(i as u64, &mut buf);
        for (o, b) in chunk.iter_mut().zip(buf.iter()) {
            *o = sd * b;
        }
    }
    Ok(out)
}

/// Correlated vector increments with covariance `2 eps_ij step`.
pub fn white_noise_vec(spec: &NoiseSpec, n: usize) -> Result<Vec<Vector3<f64>>> {
    spec.validate()?;
    let transform = spec.increment_transform()?;
    let rng = CounterRng::new(spec.seed);
    let mut path = rng.path(0);
    let mut out = Vec::with_capacity(n);
    let mut buf = [0.0; 3];
    for step in 0..n {
        path.normals(step as u64, &mut buf);
        out.push(transform * Vector3::new(buf[0], buf[1], buf[2]));
    }
    Ok(out)
}

/// Phase-space point of the stochastic system: velocities first, then the
/// local shape coordinates, with the shape point co-evolving alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    /// `(xi^1, xi^2, xi^3, x^1, x^2, x^3)`.
    pub chi: [f64; 6],
    pub rho: [f64; 3],
    pub s: f64,
}

impl PhasePoint {
    pub fn from_internal(state: &InternalState) -> Self {
        Self {
            chi: [state.xi[0], state.xi[1], state.xi[2], state.x[0], state.x[1], state.x[2]],
            rho: state.rho,
            s: state.s,
        }
    }

    pub fn xi(&self) -> Vector3<f64> {
        Vector3::new(self.chi[0], self.chi[1], self.chi[2])
    }
}

/// Drift of the six phase-space components at the given coefficients:
/// the three shape accelerations followed by the three velocities.
pub fn phase_drift(a: &[f64; 3], lam2: f64, chi: &[f64; 6]) -> [f64; 6] {
    let xi = Vector3::new(chi[0], chi[1], chi[2]);
    let acc = shape_acceleration(a, &xi, lam2);
    [acc[0], acc[1], acc[2], chi[0], chi[1], chi[2]]
}

/// Shape-frame coefficients at a phase point (identity gauge).
fn point_coefficients(spec: &SystemSpec, rho: &[f64; 3]) -> Result<(f64, FrameSolution<f64>, [f64; 3])> {
    let g = spec.conformal_factor(rho)?;
    let gamma33 = (rho[0] / spec.r0).powi(2);
    let frame = FrameSolution::solve(g, gamma33, &Matrix3::identity())?;
    let pi = spec.pi_coefficients(rho)?;
    let a = frame.pullback_gradient(&pi);
    Ok((g, frame, a))
}

/// One Euler-Maruyama step of the additive phase-space system. `noise` holds
/// six increments with variance `2 eps ds` each; the wiring selects which
/// components receive them. The shape point co-evolves deterministically.
pub fn sde_phase_step(
    state: &PhasePoint,
    spec: &SystemSpec,
    ds: f64,
    noise: &[f64; 6],
    wiring: NoiseWiring,
) -> Result<PhasePoint> {
    let (g, frame, a) = point_coefficients(spec, &state.rho)?;
    let lam2 = lambda_sq(g, spec.j_total());
    let drift = phase_drift(&a, lam2, &state.chi);
    let mut chi = state.chi;
    for i in 0..6 {
        let eta = match wiring {
            NoiseWiring::AllComponents => noise[i],
            NoiseWiring::MomentumOnly => {
                if i < 3 {
                    noise[i]
                } else {
                    0.0
                }
            }
        };
        chi[i] += drift[i] * ds + eta;
    }
    let drho = frame.differential_map(&state.xi());
    Ok(PhasePoint {
        chi,
        rho: [
            state.rho[0] + drho[0] * ds,
            state.rho[1] + drho[1] * ds,
            state.rho[2] + drho[2] * ds,
        ],
        s: state.s + ds,
    })
}

/// Multiplicative coupling matrix of the metric-fluctuation system:
/// diagonal `2 xi_i^2 - |xi|^2 - L^2`, off-diagonal `2 xi_i xi_j`.
pub fn noise_coupling_matrix(xi: &Vector3<f64>, lam2: f64) -> Matrix3<f64> {
    let s2 = xi.norm_squared();
    Matrix3::from_fn(|i, j| {
        if i == j {
            2.0 * xi[i] * xi[i] - s2 - lam2
        } else {
            2.0 * xi[i] * xi[j]
        }
    })
}

/// Stochastic-calculus reading of the multiplicative step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calculus {
    Ito,
    Stratonovich,
}

/// One step of the metric-fluctuation system for the velocity components:
/// drift from the frozen coefficients `(a, lam2)` along the base shape
/// trajectory, multiplicative coupling against the vector increment
/// `d_eta` (covariance `2 eps_ij ds`).
pub fn sde_metric_step(
    xi: &Vector3<f64>,
    a: &[f64; 3],
    lam2: f64,
    ds: f64,
    d_eta: &Vector3<f64>,
    calculus: Calculus,
) -> Vector3<f64> {
    let drift = shape_acceleration(a, xi, lam2);
    match calculus {
        Calculus::Ito => xi + drift * ds + noise_coupling_matrix(xi, lam2) * d_eta,
        Calculus::Stratonovich => {
            // Heun on the noise coupling.
            let predictor = xi + drift * ds + noise_coupling_matrix(xi, lam2) * d_eta;
            let b_mid = (noise_coupling_matrix(xi, lam2) + noise_coupling_matrix(&predictor, lam2)) * 0.5;
            xi + drift * ds + b_mid * d_eta
        }
    }
}

/// Which coordinates the ensemble histograms bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityAxes {
    /// All six phase components.
    Phase,
    /// The three velocity components.
    Momentum,
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub s_end: f64,
    /// Parameter stamps at which densities are recorded (snapped to steps).
    pub stamps: Vec<f64>,
    pub axes: DensityAxes,
    pub bins: u32,
    /// Number of trailing steps to retain per path for channel decisions
    /// (zero keeps none).
    pub terminal_window: usize,
}

/// Gaussian spread (per phase component) around a central initial state.
#[derive(Debug, Clone)]
pub struct EnsembleInit {
    pub center: PhasePoint,
    pub spread: [f64; 6],
}

/// Output of an ensemble run: one density per stamp plus censoring counts.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub stamps: Vec<f64>,
    pub densities: Vec<EnsembleDensity>,
    /// Paths that left the admissible region before each stamp.
    pub censored: Vec<u64>,
    pub n_paths: usize,
    /// Terminal phase point per path (`None` when censored before the end).
    pub finals: Vec<Option<PhasePoint>>,
    /// Trailing window of states per path (empty when not requested or the
    /// path was censored).
    pub terminal_windows: Vec<Vec<PhasePoint>>,
}

/// Runs `n_paths` independent Euler-Maruyama paths of the phase-space system
/// and bins them at the requested stamps. Step index 0 of each path's
/// counter stream is reserved for the initial spread draw.
pub fn run_ensemble(
    spec: &SystemSpec,
    noise: &NoiseSpec,
    init: &EnsembleInit,
    config: &EnsembleConfig,
) -> Result<EnsembleRun> {
    noise.validate()?;
    if config.n_paths == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one path".into()));
    }
    let ds = noise.step;
    let n_steps = (config.s_end / ds).ceil() as u64;
    let stamp_steps: Vec<u64> = config
        .stamps
        .iter()
        .map(|s| ((s / ds).round() as u64).min(n_steps))
        .collect();
    let sd_scale = match &noise.power {
        NoisePower::Scalar(e) => (2.0 * e * ds).sqrt(),
        NoisePower::Matrix(_) => {
            return Err(Error::InvalidNoise(
                "the phase-space ensemble uses scalar power".into(),
            ))
        }
    };
    let rng = CounterRng::new(noise.seed);

    struct PathRecord {
        at_stamps: Vec<Option<[f64; 6]>>,
        fin: Option<PhasePoint>,
        window: Vec<PhasePoint>,
    }

    let records: Vec<PathRecord> = (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut path_rng = rng.path(p as u64);
            let mut buf = [0.0; 8];
            // Initial spread.
            path_rng.normals(0, &mut buf);
            let mut state = init.center;
            for i in 0..6 {
                state.chi[i] += init.spread[i] * buf[i];
            }
            let mut at_stamps: Vec<Option<[f64; 6]>> = vec![None; stamp_steps.len()];
            let mut alive = true;
            let win = config.terminal_window;
            let mut window: Vec<PhasePoint> = Vec::with_capacity(win.min(4096));
            for step in 0..=n_steps {
                for (k, ss) in stamp_steps.iter().enumerate() {
                    if *ss == step && alive {
                        at_stamps[k] = Some(state.chi);
                    }
                }
                if alive && win > 0 && step + (win as u64) >= n_steps {
                    window.push(state);
                }
                if step == n_steps {
                    break;
                }
                if alive {
                    path_rng.normals(step + 1, &mut buf);
                    let mut noise6 = [0.0; 6];
                    for i in 0..6 {
                        noise6[i] = sd_scale * buf[i];
                    }
                    match sde_phase_step(&state, spec, ds, &noise6, noise.wiring) {
                        Ok(next) => state = next,
                        Err(_) => {
                            alive = false;
                            window.clear();
                        }
                    }
                }
            }
            if !alive {
                window.clear();
            }
            PathRecord { at_stamps, fin: alive.then_some(state), window }
        })
        .collect();

    // Deterministic merge in path order.
    let dim = match config.axes {
        DensityAxes::Phase => 6,
        DensityAxes::Momentum => 3,
    };
    let project = |chi: &[f64; 6]| -> Vec<f64> {
        match config.axes {
            DensityAxes::Phase => chi.to_vec(),
            DensityAxes::Momentum => chi[..3].to_vec(),
        }
    };

    // Common auto-scaled ranges over every recorded sample.
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for rec in &records {
        for chi in rec.at_stamps.iter().flatten() {
            for (d, v) in project(chi).iter().enumerate() {
                lo[d] = lo[d].min(*v);
                hi[d] = hi[d].max(*v);
            }
        }
    }
    let labels: [&'static str; 6] = ["xi1", "xi2", "xi3", "x1", "x2", "x3"];
    let axes: Vec<Axis> = (0..dim)
        .map(|d| {
            let pad = (hi[d] - lo[d]).max(1e-12) * 0.05;
            Axis::new(lo[d] - pad, hi[d] + pad, config.bins, labels[d])
        })
        .collect::<Result<_>>()?;

    let mut densities = Vec::with_capacity(stamp_steps.len());
    let mut censored = Vec::with_capacity(stamp_steps.len());
    for (k, ss) in stamp_steps.iter().enumerate() {
        let mut d = EnsembleDensity::new(axes.clone(), *ss as f64 * ds);
        let mut cens = 0u64;
        for rec in &records {
            match &rec.at_stamps[k] {
                Some(chi) => {
                    d.add(&project(chi), 1.0);
                }
                None => cens += 1,
            }
        }
        densities.push(d);
        censored.push(cens);
    }

    let mut finals = Vec::with_capacity(records.len());
    let mut terminal_windows = Vec::with_capacity(records.len());
    for r in records {
        finals.push(r.fin);
        terminal_windows.push(r.window);
    }
    Ok(EnsembleRun {
        stamps: stamp_steps.iter().map(|s| *s as f64 * ds).collect(),
        densities,
        censored,
        n_paths: config.n_paths,
        finals,
        terminal_windows,
    })
}
