//! The four subcommands. Each writes human-readable progress to `out` and
//! returns the process exit status.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use swflow_core::flow::{max_residual, max_stiffness, RK4_STABILITY_LIMIT};
use swflow_core::functional::fd_gradient_check_with;
use swflow_core::norms::l2_norm;
use swflow_core::snapshot::write_state;
use swflow_core::{
    concentration_scan, curvature, deturck_to_flow, gradients, run_flow_from, Field, FlowConfig, FlowState,
    GradientPair, Integrator, SwParams, Termination, Trajectory,
};

use crate::config::parse_config;
use crate::manifest::{
    diagnostics_csv, RunManifest, SnapshotEntry, ARTIFACT, ARTIFACT_VERSION, CSV_COLUMNS, CSV_VERSION,
    DIAGNOSTICS_FILE,
};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    /// Run completed or verification passed.
    Success = 0,
    /// Configuration, IO or other runtime error.
    Error = 1,
    /// The curvature ceiling was exceeded.
    Blowup = 2,
    /// A time step was rejected.
    StepRejected = 3,
    /// A verification threshold was missed.
    CheckFailed = 4,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn of(t: Termination) -> Self {
        match t {
            Termination::Completed => Status::Success,
            Termination::BlowupDetected => Status::Blowup,
            Termination::StepRejected => Status::StepRejected,
        }
    }
}

pub const GRAD_TOLERANCE: f64 = 1e-6;
pub const GAUGE_TOLERANCE: f64 = 1e-4;
/// Gradient orders exercised by `check-grad`.
pub const CHECK_ORDERS: [usize; 3] = [0, 1, 2];

pub fn cmd_run(config_path: &Path, out_dir: &Path, out: &mut dyn Write) -> Result<Status> {
    let started = Instant::now();
    let cfg = parse_config(config_path)?;
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let traj = run_flow_from(&cfg.flow, cfg.flow.initial_state()?)?;

    let mut snapshots = Vec::with_capacity(traj.entries.len());
    for (i, e) in traj.entries.iter().enumerate() {
        let files = write_state(out_dir, &format!("snap_{i:05}"), &e.state, cfg.flow.k, cfg.flow.s0)?;
        snapshots.push(SnapshotEntry { step: e.record.step, files });
    }
    fs::write(out_dir.join(DIAGNOSTICS_FILE), diagnostics_csv(&traj.records))
        .with_context(|| format!("cannot write {DIAGNOSTICS_FILE}"))?;
    let manifest = RunManifest {
        artifact: ARTIFACT.into(),
        version: ARTIFACT_VERSION.into(),
        config: cfg.flow.clone(),
        check: cfg.check.clone(),
        termination: traj.termination.as_str().into(),
        message: traj.message.clone(),
        snapshots,
        diagnostics_csv: DIAGNOSTICS_FILE.into(),
        csv_version: CSV_VERSION,
        csv_columns: CSV_COLUMNS.iter().map(|s| s.to_string()).collect(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let path = manifest.write(out_dir)?;

    let last = traj.records.last().expect("initial record");
    writeln!(out, "termination: {}", traj.termination.as_str())?;
    if let Some(m) = &traj.message {
        writeln!(out, "reason: {m}")?;
    }
    writeln!(out, "t = {:.6e}, E_k = {:.10e}, sup|F| = {:.6e}", last.t, last.energy.total, last.sup_f)?;
    writeln!(out, "snapshots: {}, manifest: {}", manifest.snapshots.len(), path.display())?;
    Ok(Status::of(traj.termination))
}

/// Finite-difference check of the analytic gradients for k = 0, 1, 2 at the
/// configured initial data. `sabotage` flips the gradient sign.
pub fn cmd_check_grad(config_path: &Path, sabotage: bool, out: &mut dyn Write) -> Result<Status> {
    let cfg = parse_config(config_path)?;
    let state = cfg.flow.initial_state()?;
    let mut worst: f64 = 0.0;
    for k in CHECK_ORDERS {
        let params = SwParams::new(k, cfg.flow.s0).with_dealias(cfg.flow.dealias);
        let grad = |a: &_, phi: &_, p: &SwParams| -> swflow_core::Result<GradientPair> {
            let g = gradients(a, phi, p)?;
            Ok(if sabotage { GradientPair { g_phi: -&g.g_phi, g_a: flip(g.g_a)? } } else { g })
        };
        let c = fd_gradient_check_with(&state.a, &state.phi, &params, cfg.check.h, cfg.check.directions, cfg.check.seed, grad)?;
        writeln!(out, "k = {k}: rel_err_phi = {:.3e}, rel_err_a = {:.3e}", c.rel_err_phi, c.rel_err_a)?;
        worst = worst.max(c.worst());
    }
    let pass = worst < GRAD_TOLERANCE;
    writeln!(out, "worst = {worst:.3e} ({})", if pass { "pass" } else { "FAIL" })?;
    Ok(if pass { Status::Success } else { Status::CheckFailed })
}

fn flip(a: swflow_core::ConnectionForm) -> swflow_core::Result<swflow_core::ConnectionForm> {
    swflow_core::ConnectionForm::project(-a.field())
}

/// Options of `scan`; `None` picks the defaults.
#[derive(Clone, Debug, Default)]
pub struct ScanOptions {
    pub p: Option<f64>,
    pub epsilon: Option<f64>,
    pub radii: Option<Vec<f64>>,
    /// CSV destination; defaults to `concentration.csv` next to the manifest.
    pub out: Option<std::path::PathBuf>,
}

pub const DEFAULT_SCAN_EPSILON: f64 = 1e-2;

/// Default radii: a quarter, eighth and sixteenth of the shortest period.
pub fn default_radii(lengths: &[f64]) -> Vec<f64> {
    let l = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    vec![l / 4.0, l / 8.0, l / 16.0]
}

pub fn parse_radii(text: &str) -> Result<Vec<f64>> {
    let radii = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad radius {s:?}")))
        .collect::<Result<Vec<_>>>()?;
    if radii.windows(2).any(|w| !(w[0] > w[1])) {
        anyhow::bail!("radii must be strictly descending, got {text}");
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        anyhow::bail!("radii must be positive, got {text}");
    }
    Ok(radii)
}

pub fn cmd_scan(manifest_path: &Path, opts: &ScanOptions, out: &mut dyn Write) -> Result<Status> {
    let (manifest, dir) = RunManifest::read(manifest_path)?;
    if manifest.snapshots.is_empty() {
        anyhow::bail!("manifest {} lists no snapshots", manifest_path.display());
    }
    let mut snaps: Vec<(f64, Field)> = Vec::with_capacity(manifest.snapshots.len());
    for i in 0..manifest.snapshots.len() {
        let s = manifest.load_snapshot(&dir, i)?;
        snaps.push((s.t, curvature(&s.a)?));
    }
    let p = opts.p.unwrap_or(manifest.config.k as f64 + 2.0);
    let epsilon = opts.epsilon.unwrap_or(DEFAULT_SCAN_EPSILON);
    let radii = match &opts.radii {
        Some(r) => r.clone(),
        None => default_radii(snaps[0].1.grid().lengths()),
    };
    let report = concentration_scan(&snaps, p, &radii, None, epsilon)?;
    let csv_path = opts.out.clone().unwrap_or_else(|| dir.join("concentration.csv"));
    fs::write(&csv_path, report.to_csv()).with_context(|| format!("cannot write {}", csv_path.display()))?;
    writeln!(out, "p = {p}, epsilon = {epsilon:e}, radii = {radii:?}, centers = {}", report.centers.len())?;
    if report.flagged.is_empty() {
        writeln!(out, "no concentration flagged")?;
    }
    let t_last = snaps.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let smallest = *radii.last().unwrap();
    for &c in &report.flagged {
        let v = report
            .rows
            .iter()
            .find(|r| r.center == c && r.t == t_last && r.radius == smallest)
            .map_or(f64::NAN, |r| r.value);
        writeln!(out, "flagged center {c} at {:?}: {v:.6e}", report.centers[c])?;
    }
    writeln!(out, "report: {}", csv_path.display())?;
    Ok(Status::Success)
}

#[derive(Clone, Debug)]
pub struct GaugeVerifyReport {
    /// Relative L^2 distance between the reconstructed and direct terminal states.
    pub discrepancy: f64,
    /// Flow residual of the reconstructed gauge-fixed trajectory, when enough states were kept.
    pub residual_deturck: Option<f64>,
    pub residual_direct: Option<f64>,
    pub theta_sup: f64,
    pub direct_dt: f64,
    pub status: Status,
}

/// Largest RK4 step dividing `dt` that stays inside the explicit stability region with margin.
pub fn direct_step(cfg: &FlowConfig) -> Result<(f64, usize)> {
    let grid = cfg.grid.build()?;
    let stable = 0.9 * RK4_STABILITY_LIMIT / max_stiffness(&grid, cfg.k);
    let sub = (cfg.dt / stable).ceil().max(1.0) as usize;
    Ok((cfg.dt / sub as f64, sub))
}

pub fn gauge_verify(cfg: &FlowConfig) -> Result<GaugeVerifyReport> {
    let initial = cfg.initial_state()?;
    let fixed = FlowConfig { integrator: Integrator::ImexDeturck, ..cfg.clone() };
    let (direct_dt, sub) = direct_step(cfg)?;
    let mut direct = FlowConfig { integrator: Integrator::Rk4Direct, dt: direct_dt, ..cfg.clone() };
    direct.output.snapshot_every = cfg.output.snapshot_every.saturating_mul(sub);
    direct.output.report_every = cfg.output.report_every.saturating_mul(sub);

    let (a, b) = rayon::join(|| run_flow_from(&fixed, initial.clone()), || run_flow_from(&direct, initial.clone()));
    let (fixed_traj, direct_traj) = (a?, b?);
    let theta_sup = fixed_traj.last_state().theta.as_ref().map_or(0.0, |t| t.max_abs());
    let status = [fixed_traj.termination, direct_traj.termination]
        .into_iter()
        .map(Status::of)
        .find(|s| *s != Status::Success);
    if let Some(status) = status {
        return Ok(GaugeVerifyReport {
            discrepancy: f64::NAN,
            residual_deturck: None,
            residual_direct: None,
            theta_sup,
            direct_dt,
            status,
        });
    }
    let rebuilt = deturck_to_flow(&fixed_traj)?;
    let discrepancy = relative_gap(rebuilt.last_state(), direct_traj.last_state());
    let residual = |t: &Trajectory| max_residual(t).ok();
    let status = if discrepancy < GAUGE_TOLERANCE { Status::Success } else { Status::CheckFailed };
    Ok(GaugeVerifyReport {
        discrepancy,
        residual_deturck: residual(&rebuilt),
        residual_direct: residual(&direct_traj),
        theta_sup,
        direct_dt,
        status,
    })
}

fn relative_gap(x: &FlowState, y: &FlowState) -> f64 {
    let gap = l2_norm(&(&x.phi - &y.phi)) + l2_norm(&(x.a.field() - y.a.field()));
    let scale = l2_norm(&y.phi) + l2_norm(y.a.field());
    if gap == 0.0 {
        0.0
    } else {
        gap / scale
    }
}

pub fn cmd_gauge_verify(config_path: &Path, out: &mut dyn Write) -> Result<Status> {
    let cfg = parse_config(config_path)?;
    let r = gauge_verify(&cfg.flow)?;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
    writeln!(out, "direct RK4 step: {:.6e}", r.direct_dt)?;
    match r.status {
        Status::StepRejected => writeln!(out, "a step was rejected; no comparison made")?,
        Status::Blowup => writeln!(out, "curvature ceiling exceeded; no comparison made")?,
        _ => {
            writeln!(out, "terminal discrepancy: {:.6e} (tolerance {GAUGE_TOLERANCE:e})", r.discrepancy)?;
            writeln!(out, "flow residual, gauge-fixed reconstructed: {}", show(r.residual_deturck))?;
            writeln!(out, "flow residual, direct: {}", show(r.residual_direct))?;
        }
    }
    writeln!(out, "sup |theta| at end: {:.6e}", r.theta_sup)?;
    Ok(r.status)
}
