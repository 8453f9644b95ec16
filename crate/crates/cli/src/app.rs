//! Argument parsing and dispatch for the `integrable` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use integrable_core::darboux::darboux_coordinates;
use integrable_core::factor::default_schedule;
use integrable_core::poisson::DiagonalGenerator;
use integrable_core::{ComplexMatrix, C64};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::scatter::{load_potential, scatter_run, write_run, FlowSpec};
use crate::suites::{demo_potential, run_suite, scatter_generator, su3_pendulum_run, su3_trajectory_checks};

/// Verification suites and experiments for quadratic Poisson structures,
/// SU(3) action-angle variables and forward scattering.
///
/// Tolerances and grid parameters are overridden with `--tol-NAME VALUE`
/// and `--grid-NAME VALUE` (for example `--tol-form 1e-9`,
/// `--grid-xi-count 129`).
#[derive(Debug, Parser)]
#[command(name = "integrable", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file, applied before the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory (default: $INTEGRABLE_OUT_DIR, else ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one verification suite: form, bracket, casimir, flows, su3, scatter or all.
    Verify { suite: String },
    /// Forward scattering of a potential file, optionally followed by a hierarchy flow.
    Scatter {
        #[arg(long, conflicts_with = "demo", required_unless_present = "demo")]
        potential: Option<PathBuf>,
        /// Use the bundled three-wave potential (also written to the output directory).
        #[arg(long)]
        demo: bool,
        /// Hierarchy index k of the flow ṡ = ξ^k[μ, s].
        #[arg(long)]
        flow_k: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        flow_t: f64,
        /// Comma-separated trace-free diagonal, e.g. `0.8i,0.4i,-1.2i`.
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
    },
    /// Pendulum flow on SU(3) from a seeded point; writes the trajectory CSV.
    Su3Flow,
    /// Darboux coordinates of a matrix stored as `{"n", "re", "im"}` JSON.
    Darboux { matrix_file: PathBuf },
}

fn build_config(common: &Common, overrides: &[(String, String)]) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.n {
        cfg.n = v;
    }
    if let Some(v) = common.trials {
        cfg.trials = v;
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_mu(text: &str) -> CliResult<DiagonalGenerator> {
    let entries = text
        .split(',')
        .map(|s| s.trim().parse::<C64>().map_err(|_| CliError::Config(format!("cannot parse {s:?} in --mu as a complex number"))))
        .collect::<CliResult<Vec<_>>>()?;
    DiagonalGenerator::new(entries).map_err(|e| CliError::Config(format!("--mu: {e}")))
}

fn print_written(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn verify(suite: &str, cfg: &ExperimentConfig) -> CliResult<i32> {
    let outputs = run_suite(suite, cfg)?;
    let mut all_pass = true;
    for out in &outputs {
        println!("suite {} (seed {}, n {}, trials {})", out.report.suite, cfg.seed, cfg.n, cfg.trials);
        for c in &out.report.checks {
            println!("  {}", c.line());
        }
        all_pass &= out.report.all_pass();
        print_written(&out.write(&cfg.out)?);
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn scatter(cfg: &ExperimentConfig, potential: Option<&Path>, flow_k: Option<usize>, flow_t: f64, mu: Option<&str>) -> CliResult<i32> {
    let mut written = Vec::new();
    let q = match potential {
        Some(p) => load_potential(p)?,
        None => {
            let q = demo_potential(cfg)?;
            std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
            let path = cfg.out.join("three_wave_potential.json");
            std::fs::write(&path, serde_json::to_string(&q.to_json_value()).expect("json")).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
            q
        }
    };
    let flow = match (flow_k, mu) {
        (None, None) => None,
        (k, mu) => {
            let mu = match mu {
                Some(text) => parse_mu(text)?,
                None if q.n() == 3 => scatter_generator(),
                None => return Err(CliError::Config("--mu is required for flows when n ≠ 3".into())),
            };
            Some(FlowSpec { mu, k: k.unwrap_or(1), t: flow_t })
        }
    };
    let run = scatter_run(&q, cfg, flow.as_ref())?;
    let res = run.record.residuals()?;
    println!(
        "scattered {} nodes (n = {}, ∫‖q‖ = {:.6}): det residual {:.3e}, unitarity residual {:.3e}, {} flagged",
        run.record.nodes.len(),
        run.record.n(),
        run.record.integrated_norm,
        res.det,
        res.unitarity,
        res.flagged
    );
    if run.record.large_norm_warning {
        println!("warning: large potential norm, expect reduced accuracy");
    }
    if let Some((_, r)) = &run.evolved {
        println!(
            "flow: p drift {:.3e}, q slope residual {:.3e} (without factor 2: {:.3e}), Hamiltonian drift {:.3e}",
            r.p_drift, r.q_slope_residual, r.q_slope_residual_as_written, r.hamiltonian_drift
        );
    }
    written.extend(write_run(&run, &cfg.out)?);
    print_written(&written);
    Ok(0)
}

fn su3_flow(cfg: &ExperimentConfig) -> CliResult<i32> {
    let run = su3_pendulum_run(cfg);
    let checks = su3_trajectory_checks(cfg, &run);
    let traj = run?;
    println!("pendulum over [0, {}] in {} steps: ρ = {:.6}, I₂ = {:.6}", cfg.pendulum_t, cfg.pendulum_steps, traj.rho, traj.i2);
    for c in &checks {
        println!("  {}", c.line());
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let path = cfg.out.join("su3_pendulum.csv");
    std::fs::write(&path, traj.to_table().to_csv()).map_err(|e| CliError::io(&path, e))?;
    print_written(&[path]);
    Ok(0)
}

fn darboux(cfg: &ExperimentConfig, file: &Path) -> CliResult<i32> {
    let text = std::fs::read_to_string(file).map_err(|e| CliError::io(file, e))?;
    let a = ComplexMatrix::from_json(&text).map_err(|e| CliError::FileFormat {
        path: file.to_path_buf(),
        message: match e {
            integrable_core::Error::Format(m) => m,
            other => other.to_string(),
        },
    })?;
    let chart = darboux_coordinates(&a, &default_schedule(a.n())?)?;
    let json = serde_json::to_string_pretty(&chart.to_json_value()).expect("json");
    println!("{json}");
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let path = cfg.out.join("darboux_chart.json");
    std::fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    print_written(&[path]);
    Ok(0)
}

/// Parses and runs a command line (program name first).
pub fn dispatch(args: Vec<String>) -> CliResult<i32> {
    let (rest, overrides) = crate::config::split_wildcard_flags(args)?;
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    let cfg = build_config(&cli.common, &overrides)?;
    match &cli.command {
        Command::Verify { suite } => verify(suite, &cfg),
        Command::Scatter { potential, demo: _, flow_k, flow_t, mu } => scatter(&cfg, potential.as_deref(), *flow_k, *flow_t, mu.as_deref()),
        Command::Su3Flow => su3_flow(&cfg),
        Command::Darboux { matrix_file } => darboux(&cfg, matrix_file),
    }
}

/// Runs the command line (program name first) and returns the exit code:
/// 0 when every check passes, 1 on a failed check or numerical error, 2 on
/// configuration, I/O or file-format errors.
pub fn run(args: Vec<String>) -> i32 {
    match dispatch(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
#[path = "app_tests.rs"]
mod tests;
