//! Dispatch of the CLI commands and their exit codes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use mhd_core::diagnostics::{
    convergence_study, error_norms, estimate_infsup, norm_names, StudyConfig,
};
use mhd_core::{
    Forcing, InitialData, ManufacturedSolution, MhdScheme, Spaces, StepRecord,
};

use crate::config::{Command, ConfigError, RunConfig};
use crate::vtk::write_vtk;

/// Smallest accepted slopes of the spatial study.
pub const SPATIAL_L2_GATE: f64 = 1.8;
pub const SPATIAL_ENERGY_GATE: f64 = 0.9;
/// Smallest accepted slope of the temporal study.
pub const TEMPORAL_GATE: f64 = 0.8;
/// Largest accepted relative energy identity residual.
pub const ENERGY_RESIDUAL_GATE: f64 = 1e-9;
/// Largest accepted `max_K |∇·B|`, relative to `max(1, ‖B‖)`.
pub const DIVERGENCE_GATE: f64 = 1e-11;

pub const DEFAULT_SPATIAL_GRID: [usize; 3] = [2, 4, 8];
pub const DEFAULT_TEMPORAL_STEPS: [usize; 4] = [4, 8, 16, 32];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(#[from] mhd_core::Error),
    #[error("step {step}: solver residual {residual:e} exceeds solver_tol {tol:e}")]
    Residual { step: usize, residual: f64, tol: f64 },
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(mhd_core::Error::InvalidParameter { .. } | mhd_core::Error::SizeCap { .. }) => 2,
            _ => 3,
        }
    }
}

/// Result of a successful command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// False when an acceptance gate of a gated command failed.
    pub gate_passed: bool,
    pub summary: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl Report {
    pub fn exit_code(&self) -> u8 {
        if self.gate_passed {
            0
        } else {
            1
        }
    }
}

pub fn exit_code(result: &Result<Report, CliError>) -> u8 {
    match result {
        Ok(r) => r.exit_code(),
        Err(e) => e.exit_code(),
    }
}

pub fn run_command(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    cfg.prepare_output()?;
    match cfg.command {
        Command::Run => time_run(cfg, false),
        Command::Stability => time_run(cfg, true),
        Command::MmsSpatial | Command::MmsTemporal => study(cfg),
        Command::Infsup => infsup(cfg),
    }
}

/// `run`: manufactured solution with sources; `stability`: the same initial
/// data without forcing, gated on the discrete energy identity.
fn time_run(cfg: &RunConfig, decay: bool) -> Result<Report, CliError> {
    let params = cfg.scheme_params();
    let exact = ManufacturedSolution::new(cfg.re, cfg.rm, cfg.s);
    let scheme = MhdScheme::structured(params)?;
    let forcing = if decay { Forcing::None } else { Forcing::Manufactured(&exact) };
    let csv_path = cfg.out.join(if decay { "stability.csv" } else { "run.csv" });
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    writeln!(csv, "{}", StepRecord::CSV_HEADER)?;
    let mut artifacts = vec![csv_path];

    let mut gate = true;
    let mut failures = Vec::new();
    let mut last_energy: Option<f64> = None;
    let mut io_error: Option<std::io::Error> = None;
    let initial = scheme.initialize(InitialData::Exact(&exact))?;
    let last = scheme.run(initial, &forcing, |rec, state| {
        if let Err(e) = writeln!(csv, "{}", rec.csv_row()) {
            io_error.get_or_insert(e);
        }
        if let Some(res) = rec.solver_residual {
            if res > cfg.solver_tol {
                return Err(mhd_core::Error::Solver(
                    CliError::Residual { step: rec.step, residual: res, tol: cfg.solver_tol }.to_string(),
                ));
            }
        }
        if cfg.vtk_every > 0 && rec.step % cfg.vtk_every == 0 {
            let path = cfg.out.join(format!("state_{:06}.vtk", rec.step));
            write_vtk(state, &path)?;
            artifacts.push(path);
        }
        if decay {
            let b_norm = scheme.norms().magnetic_sq(&state.b).sqrt();
            if rec.div_inf > DIVERGENCE_GATE * b_norm.max(1.0) {
                failures.push(format!("step {}: max |div B| = {:e}", rec.step, rec.div_inf));
            }
            if let Some(r) = rec.energy_residual.filter(|r| *r > ENERGY_RESIDUAL_GATE) {
                failures.push(format!("step {}: energy residual {r:e}", rec.step));
            }
            if let Some(prev) = last_energy.filter(|e| rec.energy > e * (1.0 + 1e-12)) {
                failures.push(format!("step {}: energy grew from {prev:e} to {:e}", rec.step, rec.energy));
            }
            last_energy = Some(rec.energy);
        }
        Ok(())
    })?;
    csv.flush()?;
    if let Some(e) = io_error {
        return Err(e.into());
    }

    let mut summary = vec![format!("{} steps, final time {}", last.step, last.time)];
    if decay {
        gate = failures.is_empty();
        summary.extend(failures);
        summary.push(format!("energy identity and monotone decay: {}", if gate { "pass" } else { "FAIL" }));
    } else {
        let r = error_norms(&last, &exact, scheme.discrete_curl(), cfg.n, cfg.tau)?;
        summary.push(format!(
            "final errors: u {:.3e}, grad u {:.3e}, B {:.3e}, curl_h B {:.3e}, E {:.3e}, p {:.3e}",
            r.u_l2, r.u_grad, r.b_l2, r.b_curl, r.e_l2, r.p_l2
        ));
    }
    Ok(Report { gate_passed: gate, summary, artifacts })
}

fn study(cfg: &RunConfig) -> Result<Report, CliError> {
    let exact = ManufacturedSolution::new(cfg.re, cfg.rm, cfg.s);
    let (study_cfg, name) = match cfg.command {
        Command::MmsSpatial => {
            let grid = cfg.grid.clone().unwrap_or(DEFAULT_SPATIAL_GRID.to_vec());
            (StudyConfig::spatial(cfg.re, cfg.rm, cfg.s, cfg.tau, cfg.t_final, grid), "mms_spatial.csv")
        }
        _ => {
            let grid = cfg.grid.clone().unwrap_or(DEFAULT_TEMPORAL_STEPS.to_vec());
            (StudyConfig::temporal(cfg.re, cfg.rm, cfg.s, cfg.n, cfg.t_final, grid), "mms_temporal.csv")
        }
    };
    let result = convergence_study(&study_cfg, &exact)?;
    let path = cfg.out.join(name);
    fs::write(&path, result.table.to_csv())?;

    let gates: Vec<(&str, f64)> = match cfg.command {
        Command::MmsSpatial => vec![
            (norm_names::U_L2, SPATIAL_L2_GATE),
            (norm_names::B_L2, SPATIAL_L2_GATE),
            (norm_names::GRAD_PLUS_CURL, SPATIAL_ENERGY_GATE),
        ],
        _ => vec![(norm_names::U_PLUS_B, TEMPORAL_GATE)],
    };
    let mut gate_passed = true;
    let mut summary = Vec::new();
    for (norm, min) in gates {
        let slope = result.table.slope(norm)?;
        let ok = slope >= min;
        gate_passed &= ok;
        summary.push(format!("slope {norm} = {slope:.3} (gate >= {min}): {}", if ok { "pass" } else { "FAIL" }));
    }
    for (norm, _) in &result.table.norms {
        if let Ok(s) = result.table.slope(norm) {
            summary.push(format!("observed slope {norm} = {s:.3}"));
        }
    }
    Ok(Report { gate_passed, summary, artifacts: vec![path] })
}

fn infsup(cfg: &RunConfig) -> Result<Report, CliError> {
    let spaces = Spaces::structured(cfg.n)?;
    let kappa = estimate_infsup(&spaces.v, &spaces.q)?;
    let path = cfg.out.join("infsup.csv");
    fs::write(&path, format!("n,kappa\n{},{}\n", cfg.n, mhd_core::diagnostics::format_float(kappa)))?;
    Ok(Report { gate_passed: true, summary: vec![format!("n = {}: kappa = {kappa:.6}", cfg.n)], artifacts: vec![path] })
}

