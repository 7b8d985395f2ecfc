//! Scattering-outcome classification over a trajectory's terminal window,
//! and transition-probability estimation over labeled ensembles.

use crate::error::Error;
use crate::kinematics::potential::Pair;
use crate::newtonian::NewtonTrajectory;
use crate::system::SystemSpec;
use crate::Result;
use nalgebra::Vector3;
use serde::Serialize;

/// Asymptotic outcome of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ChannelLabel {
    /// Body 1 free, pair (2,3) bound.
    Single1Pair23,
    /// Body 3 free, pair (1,2) bound.
    Single3Pair12,
    /// Body 2 free, pair (1,3) bound.
    Single2Pair13,
    /// Full breakup.
    Breakup,
    /// Bound triple.
    BoundTriple,
    /// Criteria unmet at the horizon.
    Undecided,
}

impl ChannelLabel {
    pub const ALL: [ChannelLabel; 6] = [
        ChannelLabel::Single1Pair23,
        ChannelLabel::Single3Pair12,
        ChannelLabel::Single2Pair13,
        ChannelLabel::Breakup,
        ChannelLabel::BoundTriple,
        ChannelLabel::Undecided,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Single1Pair23 => "1+(23)",
            Self::Single3Pair12 => "(12)+3",
            Self::Single2Pair13 => "(13)+2",
            Self::Breakup => "1+2+3",
            Self::BoundTriple => "bound(123)",
            Self::Undecided => "undecided",
        }
    }
}

/// Per-sample decision data: pair separations, their rates, pair internal
/// energies, and the overall size of the configuration.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSample {
    pub t: f64,
    /// Order: pairs (1,2), (1,3), (2,3).
    pub sep: [f64; 3],
    pub sep_rate: [f64; 3],
    pub pair_energy: [f64; 3],
    pub hyper_radius: f64,
}

/// Decision thresholds, in units of the configuration scale.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChannelThresholds {
    /// A pair counts as bound when its energy sits below
    /// `-bound_margin_frac |E|`.
    pub bound_margin_frac: f64,
    /// Bound pairs must stay within `r_cut_factor * r0`.
    pub r_cut_factor: f64,
    /// Escapers must recede beyond `r_far_factor * r0`.
    pub r_far_factor: f64,
    /// Fraction of the window over which escape conditions must dwell.
    pub dwell_frac: f64,
}

impl Default for ChannelThresholds {
    fn default() -> Self {
        Self { bound_margin_frac: 1e-6, r_cut_factor: 10.0, r_far_factor: 50.0, dwell_frac: 0.5 }
    }
}

/// Pair separations and their radial rates from shape coordinates and their
/// time rates (mass-scaled lengths in, physical distances out). Order:
/// pairs (1,2), (1,3), (2,3).
pub fn pair_kinematics(
    m: &crate::kinematics::MassTriple<f64>,
    shape: (f64, f64, f64),
    shape_rates: (f64, f64, f64),
) -> ([f64; 3], [f64; 3]) {
    let (r_s, big_r_s, theta) = shape;
    let (dr_s, dbig_r_s, dtheta) = shape_rates;
    let cr = 1.0 / m.scale_r();
    let c_big_r = 1.0 / m.scale_big_r();
    let (r, dr) = (r_s * cr, dr_s * cr);
    let (big_r, dbig_r) = (big_r_s * c_big_r, dbig_r_s * c_big_r);
    let (sin_t, cos_t) = theta.sin_cos();
    let lm = m.lambda_minus;
    let lp = m.lambda_plus;
    let d23 = big_r;
    let d12 = (r * r + lm * lm * big_r * big_r - 2.0 * lm * r * big_r * cos_t).max(0.0).sqrt();
    let d13 = (r * r + lp * lp * big_r * big_r + 2.0 * lp * r * big_r * cos_t).max(0.0).sqrt();
    let dd23 = dbig_r;
    let dd12 = if d12 > 0.0 {
        (r * dr + lm * lm * big_r * dbig_r
            - lm * (dr * big_r + r * dbig_r) * cos_t
            + lm * r * big_r * sin_t * dtheta)
            / d12
    } else {
        0.0
    };
    let dd13 = if d13 > 0.0 {
        (r * dr + lp * lp * big_r * dbig_r
            + lp * (dr * big_r + r * dbig_r) * cos_t
            - lp * r * big_r * sin_t * dtheta)
            / d13
    } else {
        0.0
    };
    ([d12, d13, d23], [dd12, dd13, dd23])
}

/// Decision sample from a shape-coordinate state and its time rates (used
/// for paths that carry no orientation data: pair energies use the radial
/// part of the relative motion only, a lower bound on the full pair energy).
pub fn channel_sample_from_shape(
    spec: &SystemSpec,
    t: f64,
    shape: (f64, f64, f64),
    shape_rates: (f64, f64, f64),
) -> ChannelSample {
    let m = &spec.masses;
    let (sep, sep_rate) = pair_kinematics(m, shape, shape_rates);
    let mu = [
        m.m1 * m.m2 / (m.m1 + m.m2),
        m.m1 * m.m3 / (m.m1 + m.m3),
        m.mu2,
    ];
    let pots = [Pair::P12, Pair::P13, Pair::P23];
    let mut pair_energy = [0.0; 3];
    for i in 0..3 {
        pair_energy[i] =
            0.5 * mu[i] * sep_rate[i] * sep_rate[i] + spec.potential.pair(pots[i]).value(sep[i]);
    }
    let hyper_radius = (shape.0 * shape.0 + shape.1 * shape.1).sqrt();
    ChannelSample { t, sep, sep_rate, pair_energy, hyper_radius }
}

/// Builds decision samples over the trailing `window_frac` of a Newtonian
/// trajectory.
pub fn observable_window(
    traj: &NewtonTrajectory,
    spec: &SystemSpec,
    window_frac: f64,
    n_samples: usize,
) -> Result<Vec<ChannelSample>> {
    if traj.states.len() < 2 {
        return Err(Error::InvalidArgument("trajectory too short to classify".into()));
    }
    let t_end = traj.t_end();
    let t_start = t_end * (1.0 - window_frac.clamp(0.01, 1.0));
    let m = &spec.masses;
    let mut out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let t = t_start + (t_end - t_start) * k as f64 / (n_samples.max(2) - 1) as f64;
        let st = traj.sample(t);
        let r_phys = st.q_r / m.scale_r();
        let big_r_phys = st.q_big_r / m.scale_big_r();
        let v_r = st.p_r / (m.mu0 * m.scale_r());
        let v_big_r = st.p_big_r / (m.mu0 * m.scale_big_r());

        // Relative vectors and velocities per pair.
        let rel = |which: Pair| -> (Vector3<f64>, Vector3<f64>, f64) {
            match which {
                Pair::P12 => (r_phys - big_r_phys * m.lambda_minus, v_r - v_big_r * m.lambda_minus, m.m1 * m.m2 / (m.m1 + m.m2)),
                Pair::P13 => (r_phys + big_r_phys * m.lambda_plus, v_r + v_big_r * m.lambda_plus, m.m1 * m.m3 / (m.m1 + m.m3)),
                Pair::P23 => (big_r_phys, v_big_r, m.mu2),
            }
        };
        let mut sep = [0.0; 3];
        let mut sep_rate = [0.0; 3];
        let mut pair_energy = [0.0; 3];
        for (i, which) in [Pair::P12, Pair::P13, Pair::P23].into_iter().enumerate() {
            let (d, v, mu) = rel(which);
            let dist = d.norm();
            sep[i] = dist;
            sep_rate[i] = if dist > 0.0 { d.dot(&v) / dist } else { 0.0 };
            pair_energy[i] = 0.5 * mu * v.norm_squared() + spec.potential.pair(which).value(dist);
        }
        let hyper_radius = (st.q_r.norm_squared() + st.q_big_r.norm_squared()).sqrt();
        out.push(ChannelSample { t, sep, sep_rate, pair_energy, hyper_radius });
    }
    Ok(out)
}

/// Labels one trajectory from its terminal decision window.
pub fn classify_channel(
    window: &[ChannelSample],
    spec: &SystemSpec,
    thresholds: &ChannelThresholds,
) -> Result<ChannelLabel> {
    if window.is_empty() {
        return Err(Error::InvalidArgument("empty decision window".into()));
    }
    let e_margin = thresholds.bound_margin_frac * spec.energy.abs().max(1e-12);
    let r_cut = thresholds.r_cut_factor * spec.r0;
    let r_far = thresholds.r_far_factor * spec.r0;
    let dwell = (window.len() as f64 * thresholds.dwell_frac).ceil() as usize;
    let tail = &window[window.len() - dwell.min(window.len())..];
    let last = window.last().unwrap();

    // A pair is bound when its energy stays below the margin and its
    // separation inside the cut over the dwell window.
    let pair_bound = |i: usize| -> bool {
        tail.iter().all(|s| s.pair_energy[i] < -e_margin && s.sep[i] < r_cut)
    };
    // The partner body escapes when the two distances that involve it grow
    // beyond the far radius with positive rates over the dwell window.
    let escapes = |involving: [usize; 2]| -> bool {
        tail.iter().all(|s| {
            involving
                .iter()
                .all(|i| s.sep[*i] > r_far && s.sep_rate[*i] > 0.0)
        })
    };

    let bound = [pair_bound(0), pair_bound(1), pair_bound(2)];
    match bound {
        // Exactly one bound pair with the third body receding.
        [true, false, false] if escapes([1, 2]) => return Ok(ChannelLabel::Single3Pair12),
        [false, true, false] if escapes([0, 2]) => return Ok(ChannelLabel::Single2Pair13),
        [false, false, true] if escapes([0, 1]) => return Ok(ChannelLabel::Single1Pair23),
        _ => {}
    }

    // Full breakup: no bound pair, all separations diverging with
    // nonnegative pair energies.
    let all_diverge = tail
        .iter()
        .all(|s| (0..3).all(|i| s.sep[i] > r_far && s.sep_rate[i] > 0.0));
    let all_unbound = tail.iter().all(|s| (0..3).all(|i| s.pair_energy[i] >= -e_margin));
    if !bound.iter().any(|b| *b) && all_diverge && all_unbound {
        return Ok(ChannelLabel::Breakup);
    }

    // Bound triple: total energy below every pair energy with the overall
    // size bounded over the re-check window.
    let size_bounded = window.iter().all(|s| s.hyper_radius < r_far);
    let below_pairs = (0..3).all(|i| spec.energy < last.pair_energy[i]);
    if size_bounded && below_pairs {
        return Ok(ChannelLabel::BoundTriple);
    }

    Ok(ChannelLabel::Undecided)
}

/// Estimated probability of one outcome with a binomial confidence interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransitionEstimate {
    pub label: ChannelLabel,
    pub count: usize,
    pub probability: f64,
    /// Half-width of the normal-approximation interval at the chosen level.
    pub ci_half_width: f64,
}

/// Channel table over a labeled ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionTable {
    pub entrance: ChannelLabel,
    pub n_paths: usize,
    pub estimates: Vec<TransitionEstimate>,
    /// Running mean of the indicator for each outcome after each path
    /// (finite-sample convergence diagnostic of the expectation estimator).
    pub running_means: Vec<Vec<f64>>,
    pub z_level: f64,
}

/// Estimates transition probabilities into each outcome from labeled paths.
pub fn transition_probability(
    labels: &[ChannelLabel],
    entrance: ChannelLabel,
    z_level: f64,
) -> Result<TransitionTable> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no labeled paths".into()));
    }
    let n = labels.len();
    let mut estimates = Vec::new();
    let mut running_means = Vec::new();
    for label in ChannelLabel::ALL {
        let count = labels.iter().filter(|l| **l == label).count();
        let p = count as f64 / n as f64;
        let ci = z_level * (p * (1.0 - p) / n as f64).sqrt();
        estimates.push(TransitionEstimate { label, count, probability: p, ci_half_width: ci });
        let mut acc = 0usize;
        let means = labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if *l == label {
                    acc += 1;
                }
                acc as f64 / (i + 1) as f64
            })
            .collect();
        running_means.push(means);
    }
    Ok(TransitionTable { entrance, n_paths: n, estimates, running_means, z_level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::potential::PotentialSpec;
    use crate::kinematics::{derive_masses, JacobiState};
    use crate::newtonian::{integrate_newton, Integrator, PhaseState12};
    use crate::system::SystemSpec;
    use approx::assert_relative_eq;

    fn gravity_spec(energy: f64) -> SystemSpec {
        let m: crate::kinematics::MassTriple<f64> = derive_masses(1.0, 1.0, 1.0).unwrap();
        let pot = PotentialSpec::gravity(&m, 1.0, 0.0);
        SystemSpec::new(m, pot, energy, 1.0, [0.0; 3], 3.0).unwrap()
    }

    #[test]
    fn receding_bodies_classify_as_breakup() {
        // Three bodies flying apart with large positive energy.
        let m: crate::kinematics::MassTriple<f64> = derive_masses(1.0, 1.0, 1.0).unwrap();
        let j = JacobiState {
            big_r: Vector3::new(1.0, 0.0, 0.0),
            r: Vector3::new(0.0, 1.0, 0.0),
            p_r: Vector3::new(0.0, 3.0, 0.0) * (m.mu0 * m.mu3).sqrt(),
            p_big_r: Vector3::new(3.0, 0.0, 0.0) * (m.mu0 * m.mu2).sqrt(),
        };
        let st = PhaseState12::from_jacobi(&j, &m);
        let mut spec = gravity_spec(0.0);
        spec.energy = crate::newtonian::hamiltonian(&st, &spec).unwrap();
        assert!(spec.energy > 0.0);
        let traj = integrate_newton(&st, &spec, 140.0, Integrator::default()).unwrap();
        let window = observable_window(&traj, &spec, 0.3, 40).unwrap();
        let label = classify_channel(&window, &spec, &ChannelThresholds::default()).unwrap();
        assert_eq!(label, ChannelLabel::Breakup);
    }

    #[test]
    fn kepler_pair_with_escaper_classifies_as_single_plus_pair() {
        // Pair (2,3) on a tight circular orbit, body 1 escaping radially.
        let m: crate::kinematics::MassTriple<f64> = derive_masses(1.0, 1.0, 1.0).unwrap();
        let d = 0.5;
        let v_rel = (1.0 * (m.m2 + m.m3) / d).sqrt();
        let j = JacobiState {
            big_r: Vector3::new(d, 0.0, 0.0),
            r: Vector3::new(0.0, 0.0, 4.0),
            p_r: Vector3::new(0.0, 0.0, 1.5) * (m.mu0 * m.mu3).sqrt(),
            p_big_r: Vector3::new(0.0, v_rel, 0.0) * (m.mu0 * m.mu2).sqrt(),
        };
        let st = PhaseState12::from_jacobi(&j, &m);
        let mut spec = gravity_spec(0.0);
        spec.energy = crate::newtonian::hamiltonian(&st, &spec).unwrap();
        spec.r0 = 0.5;
        let traj = integrate_newton(&st, &spec, 260.0, Integrator::Adaptive { rtol: 1e-10, atol: 1e-11 }).unwrap();
        let window = observable_window(&traj, &spec, 0.25, 60).unwrap();
        let label = classify_channel(&window, &spec, &ChannelThresholds::default()).unwrap();
        assert_eq!(label, ChannelLabel::Single1Pair23);
    }

    #[test]
    fn bound_triple_detected_at_negative_energy() {
        // Compact equal-mass configuration with small velocities: deeply
        // bound, never grows beyond the far radius.
        let m: crate::kinematics::MassTriple<f64> = derive_masses(1.0, 1.0, 1.0).unwrap();
        let j = JacobiState {
            big_r: Vector3::new(1.0, 0.0, 0.0),
            r: Vector3::new(0.0, 0.9, 0.0),
            p_r: Vector3::new(0.12, 0.0, 0.05) * (m.mu0 * m.mu3).sqrt(),
            p_big_r: Vector3::new(0.0, 0.3, 0.1) * (m.mu0 * m.mu2).sqrt(),
        };
        let st = PhaseState12::from_jacobi(&j, &m);
        let mut spec = gravity_spec(0.0);
        // Softening keeps close encounters integrable at test tolerances.
        spec.potential = PotentialSpec::gravity(&m, 1.0, 0.1);
        spec.energy = crate::newtonian::hamiltonian(&st, &spec).unwrap();
        assert!(spec.energy < 0.0);
        let traj = integrate_newton(&st, &spec, 60.0, Integrator::Adaptive { rtol: 1e-10, atol: 1e-11 }).unwrap();
        let window = observable_window(&traj, &spec, 0.5, 60).unwrap();
        let label = classify_channel(&window, &spec, &ChannelThresholds::default()).unwrap();
        assert_eq!(label, ChannelLabel::BoundTriple);
    }

    #[test]
    fn pair_kinematics_match_vector_reconstruction() {
        // Distances and radial rates from shape coordinates must agree with
        // the direct vector computation on a matching configuration.
        let m: crate::kinematics::MassTriple<f64> = derive_masses(1.3, 0.8, 1.1).unwrap();
        let q_r = Vector3::new(0.4, -0.7, 0.9);
        let q_big_r = Vector3::new(1.1, 0.3, -0.2);
        let v_r = Vector3::new(0.15, 0.2, -0.1);
        let v_big_r = Vector3::new(-0.05, 0.3, 0.2);
        let r = q_r.norm();
        let big_r = q_big_r.norm();
        let cos_t: f64 = q_r.dot(&q_big_r) / (r * big_r);
        let theta = cos_t.clamp(-1.0, 1.0).acos();
        let dr = q_r.dot(&v_r) / r;
        let dbig_r = q_big_r.dot(&v_big_r) / big_r;
        let dcos: f64 = (v_r.dot(&q_big_r) + q_r.dot(&v_big_r)) / (r * big_r)
            - cos_t * (dr / r + dbig_r / big_r);
        let dtheta = -dcos / theta.sin();
        let (sep, sep_rate) = pair_kinematics(&m, (r, big_r, theta), (dr, dbig_r, dtheta));

        let r_phys = q_r / m.scale_r();
        let big_r_phys = q_big_r / m.scale_big_r();
        let vr_phys = v_r / m.scale_r();
        let vbr_phys = v_big_r / m.scale_big_r();
        let pairs = [
            (r_phys - big_r_phys * m.lambda_minus, vr_phys - vbr_phys * m.lambda_minus),
            (r_phys + big_r_phys * m.lambda_plus, vr_phys + vbr_phys * m.lambda_plus),
            (big_r_phys, vbr_phys),
        ];
        for (i, (d, v)) in pairs.iter().enumerate() {
            assert_relative_eq!(sep[i], d.norm(), max_relative = 1e-12);
            assert_relative_eq!(sep_rate[i], d.dot(v) / d.norm(), max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_labels_give_unit_probability() {
        let labels = vec![ChannelLabel::Breakup; 17];
        let table = transition_probability(&labels, ChannelLabel::Single1Pair23, 1.96).unwrap();
        for est in &table.estimates {
            if est.label == ChannelLabel::Breakup {
                assert_eq!(est.probability, 1.0);
                assert_eq!(est.ci_half_width, 0.0);
            } else {
                assert_eq!(est.probability, 0.0);
            }
        }
    }

    #[test]
    fn probabilities_partition_unity_exactly() {
        let labels = [
            ChannelLabel::Breakup,
            ChannelLabel::Single1Pair23,
            ChannelLabel::Undecided,
            ChannelLabel::Breakup,
            ChannelLabel::BoundTriple,
            ChannelLabel::Single2Pair13,
            ChannelLabel::Breakup,
        ];
        let table = transition_probability(&labels, ChannelLabel::Single1Pair23, 1.96).unwrap();
        // The count partition is exact; the probability sum only up to
        // floating division.
        let count_total: usize = table.estimates.iter().map(|e| e.count).sum();
        assert_eq!(count_total, labels.len());
        let total: f64 = table.estimates.iter().map(|e| e.probability).sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn ci_width_scales_inverse_sqrt_n() {
        // Synthetic Bernoulli labels at p = 0.3 across decades of N: the
        // fitted log-log slope of the CI width must be -1/2.
        use crate::stochastic::CounterRng;
        let rng = CounterRng::new(31);
        let mut pts = Vec::new();
        for (k, n) in [100usize, 316, 1000, 3162, 10000].iter().enumerate() {
            let mut path = rng.path(k as u64);
            let mut labels = Vec::with_capacity(*n);
            let mut buf = [0.0; 8];
            for i in 0..*n {
                if i % 8 == 0 {
                    path.uniforms((i / 8) as u64, &mut buf);
                }
                labels.push(if buf[i % 8] < 0.3 {
                    ChannelLabel::Breakup
                } else {
                    ChannelLabel::Single1Pair23
                });
            }
            let table = transition_probability(&labels, ChannelLabel::Single1Pair23, 1.96).unwrap();
            let width = table
                .estimates
                .iter()
                .find(|e| e.label == ChannelLabel::Breakup)
                .unwrap()
                .ci_half_width;
            pts.push(((*n as f64).ln(), width.ln()));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!((slope + 0.5).abs() <= 0.05, "CI width scaling exponent {slope}");
    }

    #[test]
    fn running_means_converge_to_final_estimate() {
        let labels: Vec<ChannelLabel> = (0..200)
            .map(|i| if i % 4 == 0 { ChannelLabel::Breakup } else { ChannelLabel::Single1Pair23 })
            .collect();
        let table = transition_probability(&labels, ChannelLabel::Single1Pair23, 1.96).unwrap();
        let idx = ChannelLabel::ALL.iter().position(|l| *l == ChannelLabel::Breakup).unwrap();
        let means = &table.running_means[idx];
        assert_relative_eq!(*means.last().unwrap(), 0.25, epsilon = 1e-12);
    }
}
