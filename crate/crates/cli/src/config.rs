//! Run-configuration document: JSON with a fixed schema (unknown fields are
//! rejected), validated and resolved into the core types. All quantities use
//! the dimensionless internal unit system of the mass-scaled coordinates.

use anyhow::{anyhow, bail, Context};
use geoflow3b_core::kinematics::potential::{PairPotential, PotentialSpec, ShapeBox};
use geoflow3b_core::kinematics::{derive_masses, JacobiState, LabState};
use geoflow3b_core::newtonian::PhaseState12;
use geoflow3b_core::stochastic::{NoisePower, NoiseSpec, NoiseWiring};
use geoflow3b_core::system::SystemSpec;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; generated and recorded when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub system: SystemConfig,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub deviation: Option<DeviationConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub ensemble: Option<EnsembleBlock>,
    #[serde(default)]
    pub fp: Option<FpBlock>,
    #[serde(default)]
    pub analysis: Option<AnalysisBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub masses: [f64; 3],
    pub potential: PotentialConfig,
    /// Total energy; computed from the initial state when absent.
    #[serde(default)]
    pub energy: Option<f64>,
    /// Angle length scale; defaults to the initial scaled pair length.
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub j_integrals: [f64; 3],
    #[serde(default)]
    pub u0: U0Config,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Free,
    Gravity {
        #[serde(default = "one")]
        g_const: f64,
        #[serde(default)]
        softening: f64,
    },
    Morse {
        depth: f64,
        width: f64,
        r_eq: f64,
    },
    Tabulated {
        p12: Vec<(f64, f64)>,
        p13: Vec<(f64, f64)>,
        p23: Vec<(f64, f64)>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum U0Config {
    Explicit { value: f64 },
    Grid { r_range: [f64; 2], big_r_range: [f64; 2], grid_n: usize },
}

impl Default for U0Config {
    fn default() -> Self {
        Self::Grid {
            r_range: [0.2, 5.0],
            big_r_range: [0.2, 5.0],
            grid_n: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Jacobi {
        r: [f64; 3],
        big_r: [f64; 3],
        r_dot: [f64; 3],
        big_r_dot: [f64; 3],
    },
    Lab {
        positions: [[f64; 3]; 3],
        momenta: [[f64; 3]; 3],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub kind: IntegratorKind,
    /// Fixed step for the leapfrog integrator.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Integration horizon: ordinary time for the direct system and the
    /// comparison, arc length for geodesic-only runs.
    pub horizon: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_g_cap")]
    pub g_change_cap: f64,
    /// Whether geodesic-side horizons count ordinary time or arc length.
    #[serde(default)]
    pub horizon_kind: HorizonKind,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum HorizonKind {
    #[default]
    Time,
    ArcLength,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    #[default]
    Adaptive,
    Leapfrog,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: default_rtol(),
            atol: default_atol(),
            kind: IntegratorKind::Adaptive,
            dt: None,
            horizon: 1.0,
            max_steps: default_max_steps(),
            g_change_cap: default_g_cap(),
            horizon_kind: HorizonKind::Time,
        }
    }
}

fn default_rtol() -> f64 {
    1e-12
}

fn default_atol() -> f64 {
    1e-13
}

fn default_max_steps() -> usize {
    2_000_000
}

fn default_g_cap() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeConfig {
    #[default]
    Identity,
    RandomSegments {
        segment_len: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_compare_tol")]
    pub tolerance: f64,
    /// Re-run with a randomized gauge and report the induced deviation.
    #[serde(default)]
    pub gauge_experiment: bool,
}

fn default_samples() -> usize {
    100
}

fn default_compare_tol() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationConfig {
    pub zeta0: [f64; 3],
    #[serde(default)]
    pub zeta_dot0: [f64; 3],
    /// Fit window in arc length.
    pub window: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub power: f64,
    /// Symmetric 3x3 fluctuation power for the metric-fluctuation system.
    #[serde(default)]
    pub power_matrix: Option<[[f64; 3]; 3]>,
    pub step: f64,
    #[serde(default)]
    pub wiring: WiringConfig,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WiringConfig {
    #[default]
    All,
    Momentum,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    pub n_paths: usize,
    pub s_end: f64,
    pub stamps: Vec<f64>,
    #[serde(default)]
    pub axes: AxesConfig,
    #[serde(default = "default_bins")]
    pub bins: u32,
    /// Gaussian spread of the initial phase point per component.
    #[serde(default)]
    pub spread: [f64; 6],
    #[serde(default)]
    pub terminal_window: usize,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxesConfig {
    Phase,
    #[default]
    Momentum,
}

fn default_bins() -> u32 {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpBlock {
    pub axes: Vec<AxisConfig>,
    pub drift: DriftConfig,
    pub epsilon: f64,
    pub s_end: f64,
    pub init: FpInitConfig,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Cross-validate against a Monte Carlo ensemble of this size.
    #[serde(default)]
    pub compare_mc: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub lo: f64,
    pub hi: f64,
    pub bins: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero,
    Constant { values: Vec<f64> },
    LinearRestoring { rate: f64 },
    FrozenShapePhase { a: f64, lam2: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FpInitConfig {
    Gaussian { mean: Vec<f64>, sigma: Vec<f64> },
    Delta { at: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    #[serde(default)]
    pub kl: Option<KlConfig>,
    #[serde(default)]
    pub channels: Option<ChannelsConfig>,
    #[serde(default)]
    pub bound_states: Option<BoundStatesConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlConfig {
    /// Deviations are computed between the first stamp and every later one.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_r2")]
    pub r2_threshold: f64,
    /// Weight bins by sqrt of the conformal factor at the co-evolved shape
    /// point (flat weight when false).
    #[serde(default)]
    pub volume_weight: bool,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_r2() -> f64 {
    0.9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsConfig {
    #[serde(default = "default_window_frac")]
    pub window_frac: f64,
    #[serde(default = "default_window_samples")]
    pub samples: usize,
    #[serde(default = "default_bound_margin")]
    pub bound_margin_frac: f64,
    #[serde(default = "default_r_cut")]
    pub r_cut_factor: f64,
    #[serde(default = "default_r_far")]
    pub r_far_factor: f64,
    #[serde(default = "default_dwell")]
    pub dwell_frac: f64,
}

fn default_window_frac() -> f64 {
    0.3
}

fn default_window_samples() -> usize {
    50
}

fn default_bound_margin() -> f64 {
    1e-6
}

fn default_r_cut() -> f64 {
    10.0
}

fn default_r_far() -> f64 {
    50.0
}

fn default_dwell() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundStatesConfig {
    pub point: [f64; 3],
    #[serde(default = "default_a_box")]
    pub a_box: f64,
    #[serde(default = "default_seeds")]
    pub seeds_per_axis: usize,
    #[serde(default = "default_za_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default = "default_level_box")]
    pub r_range: [f64; 2],
    #[serde(default = "default_level_box")]
    pub big_r_range: [f64; 2],
    #[serde(default = "default_level_grid")]
    pub grid_n: usize,
}

fn default_a_box() -> f64 {
    0.6
}

fn default_seeds() -> usize {
    4
}

fn default_za_tol() -> f64 {
    1e-8
}

fn default_level_box() -> [f64; 2] {
    [0.4, 3.0]
}

fn default_level_grid() -> usize {
    14
}

/// Everything a command needs after validation.
pub struct Resolved {
    pub config: RunConfig,
    pub spec: SystemSpec,
    pub initial: Option<PhaseState12>,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).context("parsing config document")?;
        Ok(cfg)
    }

    /// Validates, fills the seed, and builds the core types.
    pub fn resolve(mut self) -> anyhow::Result<Resolved> {
        let seed = match self.seed {
            Some(s) => s,
            None => {
                let s: u64 = rand::random();
                self.seed = Some(s);
                s
            }
        };
        let [m1, m2, m3] = self.system.masses;
        let masses = derive_masses(m1, m2, m3).map_err(|e| anyhow!("{e}"))?;

        let potential = match &self.system.potential {
            PotentialConfig::Free => PotentialSpec::free(),
            PotentialConfig::Gravity { g_const, softening } => {
                if *g_const <= 0.0 {
                    bail!("gravitational coupling must be positive");
                }
                if *softening < 0.0 {
                    bail!("softening must be nonnegative");
                }
                PotentialSpec::gravity(&masses, *g_const, *softening)
            }
            PotentialConfig::Morse { depth, width, r_eq } => {
                if *depth <= 0.0 || *width <= 0.0 || *r_eq <= 0.0 {
                    bail!("morse parameters must be positive");
                }
                PotentialSpec::morse_uniform(*depth, *width, *r_eq)
            }
            PotentialConfig::Tabulated { p12, p13, p23 } => PotentialSpec {
                v12: PairPotential::tabulated(p12).map_err(|e| anyhow!("{e}"))?,
                v13: PairPotential::tabulated(p13).map_err(|e| anyhow!("{e}"))?,
                v23: PairPotential::tabulated(p23).map_err(|e| anyhow!("{e}"))?,
            },
        };

        // Initial state (optional for pure post-processing commands).
        let initial_state = match &self.initial {
            None => None,
            Some(InitialConfig::Jacobi { r, big_r, r_dot, big_r_dot }) => {
                let j = JacobiState {
                    r: Vector3::from_row_slice(r),
                    big_r: Vector3::from_row_slice(big_r),
                    p_r: Vector3::from_row_slice(r_dot) * (masses.mu0 * masses.mu3).sqrt(),
                    p_big_r: Vector3::from_row_slice(big_r_dot) * (masses.mu0 * masses.mu2).sqrt(),
                };
                j.validate().map_err(|e| anyhow!("{e}"))?;
                Some(PhaseState12::from_jacobi(&j, &masses))
            }
            Some(InitialConfig::Lab { positions, momenta }) => {
                let lab = LabState::new(
                    [
                        Vector3::from_row_slice(&positions[0]),
                        Vector3::from_row_slice(&positions[1]),
                        Vector3::from_row_slice(&positions[2]),
                    ],
                    [
                        Vector3::from_row_slice(&momenta[0]),
                        Vector3::from_row_slice(&momenta[1]),
                        Vector3::from_row_slice(&momenta[2]),
                    ],
                )
                .map_err(|e| anyhow!("{e}"))?;
                let (j, _) = geoflow3b_core::kinematics::lab_to_jacobi(&lab, &masses)
                    .map_err(|e| anyhow!("{e}"))?;
                Some(PhaseState12::from_jacobi(&j, &masses))
            }
        };

        let u0 = match &self.system.u0 {
            U0Config::Explicit { value } => {
                if *value <= 0.0 {
                    bail!("u0 must be positive");
                }
                *value
            }
            U0Config::Grid { r_range, big_r_range, grid_n } => {
                if matches!(self.system.potential, PotentialConfig::Free) {
                    bail!("a free potential has no normalization scale; supply an explicit u0");
                }
                potential
                    .u0_grid_max(
                        &masses,
                        &ShapeBox {
                            r_range: (r_range[0], r_range[1]),
                            big_r_range: (big_r_range[0], big_r_range[1]),
                            grid_n: *grid_n,
                        },
                    )
                    .map_err(|e| anyhow!("{e}"))?
            }
        };

        let r0 = match self.system.r0 {
            Some(v) => {
                if v <= 0.0 {
                    bail!("r0 must be positive");
                }
                v
            }
            None => initial_state
                .as_ref()
                .map(|s| s.q_big_r.norm())
                .ok_or_else(|| anyhow!("r0 must be given when no initial state is configured"))?,
        };

        let mut spec = SystemSpec::new(masses, potential, 0.0, r0, self.system.j_integrals, u0)
            .map_err(|e| anyhow!("{e}"))?;
        spec.energy = match self.system.energy {
            Some(e) => e,
            None => match &initial_state {
                Some(st) => {
                    geoflow3b_core::newtonian::hamiltonian(st, &spec).map_err(|e| anyhow!("{e}"))?
                }
                None => bail!("energy must be given when no initial state is configured"),
            },
        };
        if let Some(st) = &initial_state {
            let h = geoflow3b_core::newtonian::hamiltonian(st, &spec).map_err(|e| anyhow!("{e}"))?;
            let scale = spec.energy.abs().max(1.0);
            if (h - spec.energy).abs() > 1e-9 * scale {
                bail!(
                    "configured energy {} is inconsistent with the initial state's {h}",
                    spec.energy
                );
            }
        }
        if !(self.integrator.horizon > 0.0) {
            bail!("integrator horizon must be positive");
        }
        if self.integrator.kind == IntegratorKind::Leapfrog && self.integrator.dt.is_none() {
            bail!("the leapfrog integrator needs a dt");
        }

        Ok(Resolved { config: self, spec, initial: initial_state, seed })
    }
}

impl GaugeConfig {
    pub fn to_policy(&self, fallback_seed: u64) -> geoflow3b_core::geodesic::GaugePolicy {
        match self {
            Self::Identity => geoflow3b_core::geodesic::GaugePolicy::Identity,
            Self::RandomSegments { segment_len, seed } => {
                geoflow3b_core::geodesic::GaugePolicy::PerSegmentRandom {
                    seed: if *seed == 0 { fallback_seed } else { *seed },
                    segment_len: *segment_len,
                }
            }
        }
    }
}

impl NoiseConfig {
    pub fn to_core(&self, fallback_seed: u64) -> anyhow::Result<NoiseSpec> {
        let power = match self.power_matrix {
            Some(m) => NoisePower::Matrix(Matrix3::from_fn(|i, j| m[i][j])),
            None => NoisePower::Scalar(self.power),
        };
        let spec = NoiseSpec {
            power,
            seed: fallback_seed,
            step: self.step,
            wiring: match self.wiring {
                WiringConfig::All => NoiseWiring::AllComponents,
                WiringConfig::Momentum => NoiseWiring::MomentumOnly,
            },
        };
        spec.validate().map_err(|e| anyhow!("{e}"))?;
        Ok(spec)
    }
}
