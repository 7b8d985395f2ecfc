//! Command implementations: each runs the pipeline, writes its outputs and a
//! manifest, and reports whether strict audits held.

use crate::config::{
    AxesConfig, DriftConfig, FpInitConfig, HorizonKind, IntegratorKind, Resolved,
};
use crate::output::{Csv, RunDir};
use anyhow::{anyhow, bail};
use geoflow3b_core::analysis::{
    channel_sample_from_shape, chaos_slope, classify_channel, kl_divergence, level_surface_sample,
    solution_set_dimension, transition_probability, zero_accel_solve, ChannelLabel,
    ChannelThresholds, ZeroAccelProblem,
};
use geoflow3b_core::deviation::{growth_exponent, integrate_deviation, DeviationState};
use geoflow3b_core::frames::FrameSolution;
use geoflow3b_core::geodesic::{
    equivalence_check, integrate_geodesic, GaugePolicy, GeodesicOptions, GeodesicTrajectory,
    Horizon, InternalState,
};
use geoflow3b_core::newtonian::{hamiltonian, integrate_newton, Integrator, NewtonTrajectory};
use geoflow3b_core::ode::OdeOptions;
use geoflow3b_core::stochastic::fokker_planck::{fp_solve, mc_endpoints, DriftField, FpOptions, GridDensity};
use geoflow3b_core::stochastic::{
    run_ensemble, Axis, DensityAxes, EnsembleConfig, EnsembleDensity, EnsembleInit, PhasePoint,
};
use nalgebra::{DMatrix, Matrix3, Vector3};
use serde_json::json;

/// A command either satisfies its strict audits or reports why not.
pub enum Outcome {
    Ok,
    StrictFailure(String),
}

fn geodesic_options(res: &Resolved) -> GeodesicOptions {
    GeodesicOptions {
        rtol: res.config.integrator.rtol,
        atol: res.config.integrator.atol,
        max_steps: res.config.integrator.max_steps,
        h0: None,
        g_change_cap: res.config.integrator.g_change_cap,
        record_frames: false,
    }
}

fn require_initial(res: &Resolved) -> anyhow::Result<geoflow3b_core::newtonian::PhaseState12> {
    res.initial
        .ok_or_else(|| anyhow!("this command needs an `initial` block in the config"))
}

fn newton_csv(traj: &NewtonTrajectory, spec: &geoflow3b_core::system::SystemSpec) -> anyhow::Result<Vec<u8>> {
    let mut csv = Csv::new(&[
        "t", "qr_x", "qr_y", "qr_z", "qR_x", "qR_y", "qR_z", "pr_x", "pr_y", "pr_z", "pR_x",
        "pR_y", "pR_z", "H", "J_x", "J_y", "J_z",
    ]);
    for st in &traj.states {
        let h = hamiltonian(st, spec).map_err(|e| anyhow!("{e}"))?;
        let j = st.angular_momentum();
        csv.row(&[
            st.t, st.q_r[0], st.q_r[1], st.q_r[2], st.q_big_r[0], st.q_big_r[1], st.q_big_r[2],
            st.p_r[0], st.p_r[1], st.p_r[2], st.p_big_r[0], st.p_big_r[1], st.p_big_r[2], h, j[0],
            j[1], j[2],
        ]);
    }
    Ok(csv.into_bytes())
}

fn geodesic_csv(traj: &GeodesicTrajectory) -> Vec<u8> {
    let mut csv = Csv::new(&[
        "s", "t", "x1", "x2", "x3", "xi1", "xi2", "xi3", "rho1", "rho2", "rho3", "Theta", "Phi",
        "Psi", "g", "H", "J_residual", "line_residual", "frame_residual",
    ]);
    for n in &traj.samples {
        csv.row(&[
            n.s, n.t, n.x[0], n.x[1], n.x[2], n.xi[0], n.xi[1], n.xi[2], n.rho[0], n.rho[1],
            n.rho[2], n.angles[0], n.angles[1], n.angles[2], n.g, n.hamiltonian, n.j_residual,
            n.line_element_residual, n.frame_residual,
        ]);
    }
    csv.into_bytes()
}

fn run_newton(res: &Resolved) -> anyhow::Result<NewtonTrajectory> {
    let st = require_initial(res)?;
    let method = match res.config.integrator.kind {
        IntegratorKind::Adaptive => Integrator::Adaptive {
            rtol: res.config.integrator.rtol,
            atol: res.config.integrator.atol,
        },
        IntegratorKind::Leapfrog => Integrator::Leapfrog {
            dt: res.config.integrator.dt.unwrap_or(1e-3),
        },
    };
    integrate_newton(&st, &res.spec, res.config.integrator.horizon, method).map_err(|e| anyhow!("{e}"))
}

pub fn simulate_newton(res: &Resolved, run: &mut RunDir, strict: bool) -> anyhow::Result<Outcome> {
    let traj = run_newton(res)?;
    run.write_file("newton.csv", &newton_csv(&traj, &res.spec)?)?;
    let diagnostics = json!({
        "energy0": traj.energy0,
        "max_energy_drift": traj.max_energy_drift,
        "max_momentum_drift": traj.max_momentum_drift,
        "nodes": traj.states.len(),
    });
    run.write_json("diagnostics.json", &diagnostics)?;
    let outcome = if strict && (traj.max_energy_drift > 1e-8 || traj.max_momentum_drift > 1e-8) {
        Outcome::StrictFailure(format!(
            "conservation audit failed: energy drift {:.3e}, momentum drift {:.3e}",
            traj.max_energy_drift, traj.max_momentum_drift
        ))
    } else {
        Outcome::Ok
    };
    Ok(outcome)
}

fn run_geodesic(res: &Resolved, gauge: &GaugePolicy, frame_trace: bool) -> anyhow::Result<GeodesicTrajectory> {
    let st = require_initial(res)?;
    let init = InternalState::from_phase(&st, &res.spec).map_err(|e| anyhow!("{e}"))?;
    let horizon = match res.config.integrator.horizon_kind {
        HorizonKind::Time => Horizon::Time(res.config.integrator.horizon),
        HorizonKind::ArcLength => Horizon::ArcLength(res.config.integrator.horizon),
    };
    let mut opts = geodesic_options(res);
    opts.record_frames = frame_trace;
    integrate_geodesic(&init, &res.spec, gauge, horizon, &opts).map_err(|e| anyhow!("{e}"))
}

fn geodesic_strictness(traj: &GeodesicTrajectory, spec: &geoflow3b_core::system::SystemSpec) -> Option<String> {
    let a = &traj.audits;
    let scale = spec.energy_shell().max(1.0);
    let mut fails = Vec::new();
    if a.max_shell_drift > 1e-8 {
        fails.push(format!("shell drift {:.3e}", a.max_shell_drift));
    }
    if a.max_j_residual > 1e-8 {
        fails.push(format!("orientation first-integral residual {:.3e}", a.max_j_residual));
    }
    if a.max_line_element_residual > 1e-12 * scale {
        fails.push(format!("line-element residual {:.3e}", a.max_line_element_residual));
    }
    if a.max_frame_residual > 1e-12 * scale {
        fails.push(format!("frame residual {:.3e}", a.max_frame_residual));
    }
    if a.max_sphere_residual > 1e-12 {
        fails.push(format!("normalized-triple residual {:.3e}", a.max_sphere_residual));
    }
    if fails.is_empty() {
        None
    } else {
        Some(fails.join("; "))
    }
}

pub fn simulate_geodesic(
    res: &Resolved,
    run: &mut RunDir,
    strict: bool,
    frame_trace: bool,
) -> anyhow::Result<Outcome> {
    let gauge = res.config.gauge.to_policy(res.seed);
    let traj = run_geodesic(res, &gauge, frame_trace)?;
    run.write_file("geodesic.csv", &geodesic_csv(&traj))?;
    if let Some(trace) = &traj.frame_trace {
        let mut csv = Csv::new(&[
            "s", "alpha1", "alpha2", "alpha3", "beta1", "beta2", "beta3", "gamma1", "gamma2",
            "gamma3", "residual",
        ]);
        for row in trace {
            csv.row(&[
                row.s, row.alpha[0], row.alpha[1], row.alpha[2], row.beta[0], row.beta[1],
                row.beta[2], row.gamma[0], row.gamma[1], row.gamma[2], row.residual,
            ]);
        }
        run.write_file("frames.csv", &csv.into_bytes())?;
    }
    run.write_json("diagnostics.json", &traj.audits)?;
    let outcome = match geodesic_strictness(&traj, &res.spec) {
        Some(msg) if strict => Outcome::StrictFailure(msg),
        _ => Outcome::Ok,
    };
    Ok(outcome)
}

pub fn compare(res: &Resolved, run: &mut RunDir, strict: bool) -> anyhow::Result<Outcome> {
    let block = res.config.compare.clone().unwrap_or(crate::config::CompareConfig {
        samples: 100,
        tolerance: 1e-5,
        gauge_experiment: false,
    });
    let newton = run_newton(res)?;
    run.write_file("newton.csv", &newton_csv(&newton, &res.spec)?)?;

    let st = require_initial(res)?;
    let init = InternalState::from_phase(&st, &res.spec).map_err(|e| anyhow!("{e}"))?;
    let opts = geodesic_options(res);
    let geo = integrate_geodesic(
        &init,
        &res.spec,
        &GaugePolicy::Identity,
        Horizon::Time(res.config.integrator.horizon),
        &opts,
    )
    .map_err(|e| anyhow!("{e}"))?;
    run.write_file("geodesic.csv", &geodesic_csv(&geo))?;

    let report = equivalence_check(&newton, &geo, &res.spec, block.samples).map_err(|e| anyhow!("{e}"))?;

    let mut doc = serde_json::to_value(&report)?;
    if block.gauge_experiment {
        let s_end = geo.s_end();
        let random_gauge = GaugePolicy::PerSegmentRandom {
            seed: res.seed ^ 0x9E37_79B9,
            segment_len: (s_end / 40.0).max(1e-3),
        };
        let geo_rand = integrate_geodesic(
            &init,
            &res.spec,
            &random_gauge,
            Horizon::Time(res.config.integrator.horizon),
            &opts,
        )
        .map_err(|e| anyhow!("{e}"))?;
        let rand_report =
            equivalence_check(&newton, &geo_rand, &res.spec, block.samples).map_err(|e| anyhow!("{e}"))?;
        // Growth of the deviation under gauge randomization marks the
        // discrepancy as a gauge artifact rather than inequivalence.
        let artifact = rand_report.max_rel_overall > 10.0 * report.max_rel_overall.max(1e-12);
        doc["gauge_experiment"] = json!({
            "max_rel_overall": rand_report.max_rel_overall,
            "max_rel": rand_report.max_rel,
            "gauge_artifact": artifact,
        });
    }
    doc["tolerance"] = json!(block.tolerance);
    doc["pass"] = json!(report.max_rel_overall <= block.tolerance);
    run.write_json("equivalence.json", &doc)?;

    let mut fails = Vec::new();
    if report.max_rel_overall > block.tolerance {
        fails.push(format!(
            "representations deviate by {:.3e} (tolerance {:.3e})",
            report.max_rel_overall, block.tolerance
        ));
    }
    if let Some(msg) = geodesic_strictness(&geo, &res.spec) {
        fails.push(msg);
    }
    if newton.max_energy_drift > 1e-8 {
        fails.push(format!("direct-side energy drift {:.3e}", newton.max_energy_drift));
    }
    Ok(if strict && !fails.is_empty() {
        Outcome::StrictFailure(fails.join("; "))
    } else {
        Outcome::Ok
    })
}

pub fn deviate(res: &Resolved, run: &mut RunDir, strict: bool) -> anyhow::Result<Outcome> {
    let block = res
        .config
        .deviation
        .clone()
        .ok_or_else(|| anyhow!("the deviate command needs a `deviation` block"))?;
    let st = require_initial(res)?;
    let init = InternalState::from_phase(&st, &res.spec).map_err(|e| anyhow!("{e}"))?;
    let opts = geodesic_options(res);
    let base = integrate_geodesic(
        &init,
        &res.spec,
        &GaugePolicy::Identity,
        Horizon::ArcLength(res.config.integrator.horizon),
        &opts,
    )
    .map_err(|e| anyhow!("{e}"))?;

    let dev0 = DeviationState {
        zeta: Vector3::from_row_slice(&block.zeta0),
        zeta_dot: Vector3::from_row_slice(&block.zeta_dot0),
        eta: 0.0,
    };
    let traj = integrate_deviation(
        &base,
        &res.spec,
        &dev0,
        &OdeOptions { rtol: opts.rtol, atol: opts.atol, ..Default::default() },
    )
    .map_err(|e| anyhow!("{e}"))?;

    let mut csv = Csv::new(&["s", "zeta1", "zeta2", "zeta3", "norm", "log_norm"]);
    for p in &traj.samples {
        csv.row(&[p.s, p.zeta[0], p.zeta[1], p.zeta[2], p.norm, p.log_norm]);
    }
    run.write_file("deviation.csv", &csv.into_bytes())?;

    let fit = growth_exponent(&traj, (block.window[0], block.window[1])).map_err(|e| anyhow!("{e}"))?;
    run.write_json("deviation.json", &json!({ "fit": fit, "base_audits": base.audits }))?;
    let outcome = match geodesic_strictness(&base, &res.spec) {
        Some(msg) if strict => Outcome::StrictFailure(msg),
        _ => Outcome::Ok,
    };
    Ok(outcome)
}

fn ensemble_init(res: &Resolved, spread: [f64; 6]) -> anyhow::Result<EnsembleInit> {
    let st = require_initial(res)?;
    let init = InternalState::from_phase(&st, &res.spec).map_err(|e| anyhow!("{e}"))?;
    Ok(EnsembleInit { center: PhasePoint::from_internal(&init), spread })
}

fn run_configured_ensemble(res: &Resolved) -> anyhow::Result<geoflow3b_core::stochastic::EnsembleRun> {
    let noise = res
        .config
        .noise
        .as_ref()
        .ok_or_else(|| anyhow!("this command needs a `noise` block"))?
        .to_core(res.seed)?;
    let block = res
        .config
        .ensemble
        .as_ref()
        .ok_or_else(|| anyhow!("this command needs an `ensemble` block"))?;
    let init = ensemble_init(res, block.spread)?;
    let config = EnsembleConfig {
        n_paths: block.n_paths,
        s_end: block.s_end,
        stamps: block.stamps.clone(),
        axes: match block.axes {
            AxesConfig::Phase => DensityAxes::Phase,
            AxesConfig::Momentum => DensityAxes::Momentum,
        },
        bins: block.bins,
        terminal_window: block.terminal_window,
    };
    run_ensemble(&res.spec, &noise, &init, &config).map_err(|e| anyhow!("{e}"))
}

fn density_csv(d: &EnsembleDensity) -> Vec<u8> {
    let dim = d.dim();
    let mut header: Vec<String> = (0..dim).map(|i| format!("bin{i}")).collect();
    header.extend((0..dim).map(|i| format!("center{i}")));
    header.push("mass".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut csv = Csv::new(&header_refs);
    for (key, _) in d.iter() {
        let mut row: Vec<f64> = key.iter().map(|k| *k as f64).collect();
        row.extend(d.centers(key));
        row.push(d.prob(key));
        csv.row(&row);
    }
    csv.into_bytes()
}

pub fn ensemble(res: &Resolved, run: &mut RunDir, _strict: bool) -> anyhow::Result<Outcome> {
    let er = run_configured_ensemble(res)?;
    for (k, d) in er.densities.iter().enumerate() {
        run.write_file(&format!("density_{k:03}.csv"), &density_csv(d))?;
    }
    let noise = res.config.noise.as_ref().unwrap();
    let block = res.config.ensemble.as_ref().unwrap();
    let axes_doc: Vec<_> = er.densities[0]
        .axes
        .iter()
        .map(|a| json!({"lo": a.lo, "hi": a.hi, "bins": a.bins, "label": a.label}))
        .collect();
    run.write_json(
        "ensemble.json",
        &json!({
            "n_paths": er.n_paths,
            "seed": res.seed,
            "power": noise.power,
            "power_matrix": noise.power_matrix,
            "step": noise.step,
            "bins": block.bins,
            "axes": axes_doc,
            "stamps": er.stamps,
            "censored": er.censored,
            "out_of_range": er.densities.iter().map(|d| d.out_of_range).collect::<Vec<_>>(),
        }),
    )?;
    Ok(Outcome::Ok)
}

fn drift_field(cfg: &DriftConfig) -> DriftField {
    match cfg {
        DriftConfig::Zero => DriftField::Zero,
        DriftConfig::Constant { values } => DriftField::Constant(values.clone()),
        DriftConfig::LinearRestoring { rate } => DriftField::LinearRestoring { rate: *rate },
        DriftConfig::FrozenShapePhase { a, lam2 } => DriftField::FrozenShapePhase { a: *a, lam2: *lam2 },
    }
}

pub fn fp(res: &Resolved, run: &mut RunDir, strict: bool) -> anyhow::Result<Outcome> {
    let block = res.config.fp.as_ref().ok_or_else(|| anyhow!("the fp command needs an `fp` block"))?;
    let axes: Vec<Axis> = block
        .axes
        .iter()
        .enumerate()
        .map(|(i, a)| Axis::new(a.lo, a.hi, a.bins, if i == 0 { "u0" } else { "u1" }))
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow!("{e}"))?;
    let init = match &block.init {
        FpInitConfig::Gaussian { mean, sigma } => {
            GridDensity::gaussian(axes.clone(), mean, sigma).map_err(|e| anyhow!("{e}"))?
        }
        FpInitConfig::Delta { at } => GridDensity::delta(axes.clone(), at).map_err(|e| anyhow!("{e}"))?,
    };
    let drift = drift_field(&block.drift);
    let dim = axes.len();
    let diffusion = DMatrix::from_diagonal_element(dim, dim, block.epsilon);
    let solved = fp_solve(
        &init,
        &drift,
        &diffusion,
        block.s_end,
        &FpOptions { dt: block.dt, safety: 0.4 },
    )
    .map_err(|e| anyhow!("{e}"))?;

    // Grid dump: indices, centers, density.
    {
        let mut header: Vec<String> = (0..dim).map(|i| format!("bin{i}")).collect();
        header.extend((0..dim).map(|i| format!("center{i}")));
        header.push("density".into());
        let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut csv = Csv::new(&refs);
        let n1 = if dim == 2 { solved.axes[1].bins as usize } else { 1 };
        for (flat, p) in solved.data.iter().enumerate() {
            let (i, j) = (flat / n1, flat % n1);
            let mut row = vec![i as f64];
            if dim == 2 {
                row.push(j as f64);
            }
            row.push(solved.axes[0].center(i as u32));
            if dim == 2 {
                row.push(solved.axes[1].center(j as u32));
            }
            row.push(*p);
            csv.row(&row);
        }
        run.write_file("fp_density.csv", &csv.into_bytes())?;
    }

    let mut doc = json!({
        "mass": solved.mass(),
        "min_value": solved.min_value(),
        "moments": (0..dim).map(|d| {
            let (m, v) = solved.moments(d);
            json!({"axis": d, "mean": m, "variance": v})
        }).collect::<Vec<_>>(),
    });

    let mut kl_vs_mc = None;
    if let Some(n_paths) = block.compare_mc {
        // Monte Carlo counterpart on the same coefficients and binning.
        let l = DMatrix::from_diagonal_element(dim, dim, (2.0 * block.epsilon).sqrt());
        let (mean, sigma) = match &block.init {
            FpInitConfig::Gaussian { mean, sigma } => (mean.clone(), sigma.clone()),
            FpInitConfig::Delta { at } => (at.clone(), vec![0.0; dim]),
        };
        let noise_step = res.config.noise.as_ref().map(|n| n.step).unwrap_or(1e-3);
        let ends = mc_endpoints(&drift, &l, &mean, &sigma, noise_step, block.s_end, n_paths, res.seed);
        let mut mc = EnsembleDensity::new(axes.clone(), block.s_end);
        for e in &ends {
            mc.add(e, 1.0);
        }
        let mut grid_density = EnsembleDensity::new(axes.clone(), block.s_end);
        let vol = solved.cell_volume();
        let n1 = if dim == 2 { solved.axes[1].bins as usize } else { 1 };
        for (flat, p) in solved.data.iter().enumerate() {
            if *p > 0.0 {
                let (i, j) = (flat / n1, flat % n1);
                let mut center = vec![solved.axes[0].center(i as u32)];
                if dim == 2 {
                    center.push(solved.axes[1].center(j as u32));
                }
                // Emulate counts so additive smoothing is comparable.
                grid_density.add(&center, (p * vol * n_paths as f64).round());
            }
        }
        let report = kl_divergence(&mc, &grid_density, |_| 1.0, 1.0).map_err(|e| anyhow!("{e}"))?;
        doc["kl_vs_mc"] = serde_json::to_value(&report)?;
        kl_vs_mc = Some(report.value);
    }
    run.write_json("fp.json", &doc)?;

    let mass_err = (solved.mass() - 1.0).abs();
    let mut fails = Vec::new();
    if mass_err > 1e-6 {
        fails.push(format!("mass conservation violated by {mass_err:.3e}"));
    }
    if let Some(kl) = kl_vs_mc {
        if kl > 0.05 {
            fails.push(format!("Monte Carlo / grid deviation {kl:.3} exceeds 0.05"));
        }
    }
    Ok(if strict && !fails.is_empty() {
        Outcome::StrictFailure(fails.join("; "))
    } else {
        Outcome::Ok
    })
}

pub fn analyze(res: &Resolved, run: &mut RunDir, _strict: bool) -> anyhow::Result<Outcome> {
    let block = res
        .config
        .analysis
        .as_ref()
        .ok_or_else(|| anyhow!("the analyze command needs an `analysis` block"))?;
    let mut doc = json!({});

    if block.kl.is_some() || block.channels.is_some() {
        let er = run_configured_ensemble(res)?;

        if let Some(kl_cfg) = &block.kl {
            if er.densities.len() < 2 {
                bail!("deviation analysis needs at least two stamps");
            }
            let mut series = Vec::new();
            let mut pairs = Vec::new();
            for k in 1..er.densities.len() {
                let report = kl_divergence(&er.densities[0], &er.densities[k], |_| 1.0, kl_cfg.alpha)
                    .map_err(|e| anyhow!("{e}"))?;
                pairs.push(((er.stamps[k] - er.stamps[0]).abs(), report.value));
                series.push(report);
            }
            let fit = if pairs.len() >= 5 {
                Some(chaos_slope(&pairs, kl_cfg.r2_threshold).map_err(|e| anyhow!("{e}"))?)
            } else {
                None
            };
            doc["kl"] = json!({ "series": series, "slope": fit });
        }

        if let Some(ch_cfg) = &block.channels {
            let noise_step = res.config.noise.as_ref().map(|n| n.step).unwrap_or(1e-3);
            let thresholds = ChannelThresholds {
                bound_margin_frac: ch_cfg.bound_margin_frac,
                r_cut_factor: ch_cfg.r_cut_factor,
                r_far_factor: ch_cfg.r_far_factor,
                dwell_frac: ch_cfg.dwell_frac,
            };
            let mut labels = Vec::with_capacity(er.n_paths);
            for window in &er.terminal_windows {
                if window.is_empty() {
                    labels.push(ChannelLabel::Undecided);
                    continue;
                }
                let samples: Vec<_> = window
                    .iter()
                    .map(|p| phase_point_channel_sample(p, &res.spec, noise_step))
                    .collect::<anyhow::Result<_>>()?;
                labels.push(
                    classify_channel(&samples, &res.spec, &thresholds).map_err(|e| anyhow!("{e}"))?,
                );
            }
            let table = transition_probability(&labels, ChannelLabel::Single1Pair23, 1.96)
                .map_err(|e| anyhow!("{e}"))?;
            doc["channels"] = serde_json::to_value(&table)?;
        }
    }

    if let Some(bs) = &block.bound_states {
        let problem = ZeroAccelProblem::at_point(&res.spec, &bs.point).map_err(|e| anyhow!("{e}"))?;
        let sols = zero_accel_solve(&problem, bs.a_box, bs.seeds_per_axis, bs.tolerance)
            .map_err(|e| anyhow!("{e}"))?;
        let dims: Vec<usize> =
            sols.iter().map(|s| solution_set_dimension(&problem, s, 1e-6)).collect();
        let mut bs_doc = json!({
            "point": bs.point,
            "solutions": sols,
            "local_dimensions": dims,
        });
        if let Some(level) = bs.level {
            let surf = level_surface_sample(
                &res.spec,
                level,
                (bs.r_range[0], bs.r_range[1]),
                (bs.big_r_range[0], bs.big_r_range[1]),
                bs.grid_n,
                1e-8,
            )
            .map_err(|e| anyhow!("{e}"))?;
            let mut csv = Csv::new(&["rho1", "rho2", "rho3", "residual", "component"]);
            for (i, p) in surf.points.iter().enumerate() {
                csv.row(&[p[0], p[1], p[2], surf.residuals[i], surf.components[i] as f64]);
            }
            run.write_file("level_surface.csv", &csv.into_bytes())?;
            bs_doc["level_surface"] = json!({
                "level": level,
                "points": surf.points.len(),
                "components": surf.n_components,
                "max_residual": surf.residuals.iter().cloned().fold(0.0, f64::max),
            });
        }
        doc["bound_states"] = bs_doc;
    }

    run.write_json("analysis.json", &doc)?;
    Ok(Outcome::Ok)
}

/// Channel decision sample from an ensemble path state: shape rates from the
/// frame map converted to ordinary time.
fn phase_point_channel_sample(
    p: &PhasePoint,
    spec: &geoflow3b_core::system::SystemSpec,
    _ds: f64,
) -> anyhow::Result<geoflow3b_core::analysis::ChannelSample> {
    let g = spec.conformal_factor(&p.rho).map_err(|e| anyhow!("{e}"))?;
    let gamma33 = (p.rho[0] / spec.r0).powi(2);
    let frame = FrameSolution::solve(g, gamma33, &Matrix3::identity()).map_err(|e| anyhow!("{e}"))?;
    let drho_ds = frame.differential_map(&p.xi());
    let dt_ds = (spec.masses.mu0 * spec.energy_shell() / (g * spec.u0)).sqrt();
    let shape = (p.rho[0], p.rho[1], p.rho[2] / spec.r0);
    let rates = (
        drho_ds[0] / dt_ds,
        drho_ds[1] / dt_ds,
        drho_ds[2] / (spec.r0 * dt_ds),
    );
    Ok(channel_sample_from_shape(spec, p.s, shape, rates))
}
