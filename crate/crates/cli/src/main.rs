//! Batch front end: run configuration in, trajectory/density/report files
//! plus a checksummed manifest out.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 strict-audit failure.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use commands::Outcome;
use config::RunConfig;
use output::RunDir;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "geoflow3b", version, about = "Three-body dynamics as geodesic flow: direct and manifold representations, stochastic layer, and scattering analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the direct (Newtonian) reduced system.
    SimulateNewton(CommonArgs),
    /// Integrate the geodesic representation with co-evolved frames.
    SimulateGeodesic {
        #[command(flatten)]
        common: CommonArgs,
        /// Record the per-step frame coefficients.
        #[arg(long)]
        frame_trace: bool,
    },
    /// Run both representations and report their deviation.
    Compare(CommonArgs),
    /// Integrate the linear deviation along a geodesic and fit its growth.
    Deviate(CommonArgs),
    /// Run a seeded stochastic ensemble and dump densities.
    Ensemble(CommonArgs),
    /// Solve a density-equation reduction on a grid.
    Fp(CommonArgs),
    /// Post-process: density deviations, channels, bound-state explorer.
    Analyze(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Run-configuration document (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero when any acceptance-level audit fails.
    #[arg(long)]
    strict: bool,
}

fn init_threads() {
    if let Ok(v) = std::env::var("GEOFLOW3B_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn run(command: &Command) -> Result<Outcome, (u8, anyhow::Error)> {
    let (common, name, frame_trace) = match command {
        Command::SimulateNewton(c) => (c, "simulate-newton", false),
        Command::SimulateGeodesic { common, frame_trace } => {
            (common, "simulate-geodesic", *frame_trace)
        }
        Command::Compare(c) => (c, "compare", false),
        Command::Deviate(c) => (c, "deviate", false),
        Command::Ensemble(c) => (c, "ensemble", false),
        Command::Fp(c) => (c, "fp", false),
        Command::Analyze(c) => (c, "analyze", false),
    };

    let cfg = RunConfig::from_file(&common.config).map_err(|e| (2, e))?;
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let resolved = cfg.resolve().map_err(|e| (2, e))?;

    // Record the resolved configuration (seed included) for exact reruns.
    let resolved_json = serde_json::to_string_pretty(&resolved.config)
        .map_err(|e| (3, anyhow::Error::from(e)))?;
    let mut run_dir = RunDir::create(&out_dir, name, &resolved_json).map_err(|e| (3, e))?;
    run_dir
        .write_file("resolved_config.json", format!("{resolved_json}\n").as_bytes())
        .map_err(|e| (3, e))?;

    let outcome = match command {
        Command::SimulateNewton(_) => commands::simulate_newton(&resolved, &mut run_dir, common.strict),
        Command::SimulateGeodesic { .. } => {
            commands::simulate_geodesic(&resolved, &mut run_dir, common.strict, frame_trace)
        }
        Command::Compare(_) => commands::compare(&resolved, &mut run_dir, common.strict),
        Command::Deviate(_) => commands::deviate(&resolved, &mut run_dir, common.strict),
        Command::Ensemble(_) => commands::ensemble(&resolved, &mut run_dir, common.strict),
        Command::Fp(_) => commands::fp(&resolved, &mut run_dir, common.strict),
        Command::Analyze(_) => commands::analyze(&resolved, &mut run_dir, common.strict),
    }
    .map_err(|e| (3, e))?;

    let diagnostics = match &outcome {
        Outcome::Ok => serde_json::json!({"strict_audits": "pass"}),
        Outcome::StrictFailure(msg) => serde_json::json!({"strict_audits": msg}),
    };
    run_dir.finish(diagnostics).map_err(|e| (3, e))?;
    Ok(outcome)
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::StrictFailure(msg)) => {
            eprintln!("strict audit failed: {msg}");
            ExitCode::from(4)
        }
        Err((code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
