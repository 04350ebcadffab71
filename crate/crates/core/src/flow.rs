//! Time integration of the gradient flow and of its gauge-fixed parabolic form.

use serde::{Deserialize, Serialize};

use crate::config::{FlowConfig, Integrator};
use crate::diffgeo::{codifferential, curvature, exterior_d, gauge_transform, laplacian_power};
use crate::error::{Error, Result};
use crate::field::{ConnectionForm, Field, GaugePhase, C64, I};
use crate::functional::{gradients, sw_energy, sw_energy_k, EnergyBreakdown, SwParams};
use crate::grid::TorusGrid;
use crate::norms::{l2_norm, l2_norm_sq, lp_norm, sup_norm};

/// Heuristic RK4 stability bound on `dt * max|xi|^{2(k+1)}`.
pub const RK4_STABILITY_LIMIT: f64 = 2.78;

#[derive(Clone, Debug)]
pub struct FlowState {
    pub phi: Field,
    pub a: ConnectionForm,
    pub t: f64,
    /// Accumulated gauge phase of a gauge-fixed run.
    pub theta: Option<GaugePhase>,
}

impl FlowState {
    pub fn new(phi: Field, a: ConnectionForm) -> Self {
        Self { phi, a, t: 0.0, theta: None }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn grid(&self) -> &TorusGrid {
        self.phi.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite()
            && self.a.is_finite()
            && self.theta.as_ref().is_none_or(|th| th.theta().is_finite())
    }
}

/// Right-hand side selector for [`step_rk4`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhsKind {
    Direct,
    Deturck,
}

/// Time derivative of a state; `theta` is present for gauge-fixed systems.
#[derive(Clone, Debug)]
pub struct Rates {
    pub phi: Field,
    pub a: ConnectionForm,
    pub theta: Option<Field>,
}

/// `(-g_phi, -g_a)`.
pub fn flow_rhs(state: &FlowState, params: &SwParams) -> Result<(Field, ConnectionForm)> {
    let g = gradients(&state.a, &state.phi, params)?;
    Ok((-&g.g_phi, ConnectionForm::project(-g.g_a.field())?))
}

/// Gauge-fixing driver `f = L^k d* a`, where `A = i a` and `L = -sum d_j^2`.
pub fn deturck_driver(a: &ConnectionForm, k: usize) -> Result<Field> {
    let div = codifferential(&a.real_form())?;
    Ok(laplacian_power(&div, k as u32).real_projection())
}

/// Gauge-fixed right-hand side: the flow plus `i f phi` in the spinor, `-i df`
/// in the connection, and `theta' = f` for the reconstructing gauge.
pub fn deturck_rates(state: &FlowState, params: &SwParams) -> Result<Rates> {
    let (mut phi_dot, a_dot) = flow_rhs(state, params)?;
    let f = deturck_driver(&state.a, params.k)?;
    let mut rot = state.phi.mul_pointwise(&f);
    if params.dealias {
        rot = rot.dealiased();
    }
    phi_dot.axpy(I, &rot);
    let df = exterior_d(&f)?.real_projection();
    let mut a_dot = a_dot.into_field();
    a_dot.axpy(-I, &df);
    Ok(Rates { phi: phi_dot, a: ConnectionForm::project(a_dot)?, theta: Some(f) })
}

pub fn deturck_rhs(state: &FlowState, params: &SwParams) -> Result<(Field, ConnectionForm)> {
    let r = deturck_rates(state, params)?;
    Ok((r.phi, r.a))
}

fn rates(kind: RhsKind, state: &FlowState, params: &SwParams) -> Result<Rates> {
    match kind {
        RhsKind::Direct => {
            let (phi, a) = flow_rhs(state, params)?;
            Ok(Rates { phi, a, theta: None })
        }
        RhsKind::Deturck => deturck_rates(state, params),
    }
}

/// Flat vector view `(phi, A, theta)` used by the Runge-Kutta stages.
#[derive(Clone)]
struct Stage {
    phi: Field,
    a: Field,
    theta: Option<Field>,
}

impl Stage {
    fn of_state(s: &FlowState) -> Self {
        Stage {
            phi: s.phi.clone(),
            a: s.a.field().clone(),
            theta: s.theta.as_ref().map(|t| t.theta().clone()),
        }
    }

    fn of_rates(r: Rates) -> Self {
        Stage { phi: r.phi, a: r.a.into_field(), theta: r.theta }
    }

    fn axpy(&mut self, alpha: f64, x: &Stage) {
        let c = C64::new(alpha, 0.0);
        self.phi.axpy(c, &x.phi);
        self.a.axpy(c, &x.a);
        if let (Some(t), Some(xt)) = (self.theta.as_mut(), x.theta.as_ref()) {
            t.axpy(c, xt);
        }
    }

    fn plus(&self, alpha: f64, x: &Stage) -> Stage {
        let mut out = self.clone();
        out.axpy(alpha, x);
        out
    }

    fn into_state(self, t: f64) -> Result<FlowState> {
        Ok(FlowState {
            phi: self.phi,
            a: ConnectionForm::project(self.a)?,
            t,
            theta: match self.theta {
                Some(th) => Some(GaugePhase::new(th.real_projection())?),
                None => None,
            },
        })
    }
}

fn stage_rates(kind: RhsKind, s: &Stage, t: f64, params: &SwParams) -> Result<Stage> {
    let st = s.clone().into_state(t)?;
    let mut r = rates(kind, &st, params)?;
    if s.theta.is_none() {
        r.theta = None;
    }
    Ok(Stage::of_rates(r))
}

fn rejected(t: f64, reason: impl Into<String>) -> Error {
    Error::StepRejected { t, reason: reason.into() }
}

/// Largest value of the linear stiffness `|xi|^{2(k+1)}` on the grid.
pub fn max_stiffness(grid: &TorusGrid, k: usize) -> f64 {
    grid.max_ksq().powi(k as i32 + 1)
}

/// One classical explicit RK4 step.
pub fn step_rk4(state: &FlowState, kind: RhsKind, dt: f64, params: &SwParams) -> Result<FlowState> {
    let stiff = dt * max_stiffness(state.grid(), params.k);
    if stiff > RK4_STABILITY_LIMIT {
        return Err(rejected(
            state.t,
            format!("dt * max|xi|^(2k+2) = {stiff:.3} exceeds the explicit stability limit {RK4_STABILITY_LIMIT}"),
        ));
    }
    let mut u = Stage::of_state(state);
    if kind == RhsKind::Deturck && u.theta.is_none() {
        u.theta = Some(Field::zeros(state.grid(), 0, 1));
    }
    let t = state.t;
    let k1 = stage_rates(kind, &u, t, params)?;
    let k2 = stage_rates(kind, &u.plus(dt / 2.0, &k1), t + dt / 2.0, params)?;
    let k3 = stage_rates(kind, &u.plus(dt / 2.0, &k2), t + dt / 2.0, params)?;
    let k4 = stage_rates(kind, &u.plus(dt, &k3), t + dt, params)?;
    u.axpy(dt / 6.0, &k1);
    u.axpy(dt / 3.0, &k2);
    u.axpy(dt / 3.0, &k3);
    u.axpy(dt / 6.0, &k4);
    let out = u.into_state(t + dt)?;
    if !out.is_finite() {
        return Err(rejected(t, "nonfinite values"));
    }
    Ok(out)
}

/// Integrating factor `e^{-|xi|^{2(k+1)} h}` on `phi` and `A`; `theta` is untouched.
struct Propagator {
    decay: Vec<f64>,
}

impl Propagator {
    fn new(grid: &TorusGrid, k: usize, h: f64) -> Self {
        let decay = grid.ksq().iter().map(|q| (-q.powi(k as i32 + 1) * h).exp()).collect();
        Propagator { decay }
    }

    fn apply(&self, s: &Stage) -> Stage {
        let d = &self.decay;
        Stage {
            phi: s.phi.spectral_multiply(|i| C64::new(d[i], 0.0)),
            a: s.a.spectral_multiply(|i| C64::new(d[i], 0.0)),
            theta: s.theta.clone(),
        }
    }
}

/// Stiff linear part `Lambda u` with symbol `|xi|^{2(k+1)}`, zero on `theta`.
fn linear_part(s: &Stage, k: usize) -> Stage {
    let ksq = s.phi.grid().ksq().to_vec();
    let sym = |i: usize| C64::new(ksq[i].powi(k as i32 + 1), 0.0);
    Stage {
        phi: s.phi.spectral_multiply(sym),
        a: s.a.spectral_multiply(sym),
        theta: s.theta.as_ref().map(|t| t.zeros_like()),
    }
}

/// `rhs(u) + Lambda u`: everything that is not the diagonal stiff part.
fn nonlinear_part(s: &Stage, t: f64, params: &SwParams) -> Result<Stage> {
    let mut r = stage_rates(RhsKind::Deturck, s, t, params)?;
    r.axpy(1.0, &linear_part(s, params.k));
    Ok(r)
}

/// One Lawson (integrating-factor) RK4 step of the gauge-fixed system.
///
/// The linear part is propagated exactly, so a pure linear mode decays at
/// its exact rate and no step-size restriction comes from it.
pub fn step_imex(state: &FlowState, dt: f64, params: &SwParams) -> Result<FlowState> {
    let g = state.grid();
    let mut u = Stage::of_state(state);
    if u.theta.is_none() {
        u.theta = Some(Field::zeros(g, 0, 1));
    }
    let t = state.t;
    let half = Propagator::new(g, params.k, dt / 2.0);
    let full = Propagator::new(g, params.k, dt);

    let k1 = nonlinear_part(&u, t, params)?;
    let e_half_u = half.apply(&u);
    let k2 = nonlinear_part(&half.apply(&u.plus(dt / 2.0, &k1)), t + dt / 2.0, params)?;
    let k3 = nonlinear_part(&e_half_u.plus(dt / 2.0, &k2), t + dt / 2.0, params)?;
    let e_full_u = full.apply(&u);
    let k4 = nonlinear_part(&e_full_u.plus(dt, &half.apply(&k3)), t + dt, params)?;

    let mut out = e_full_u;
    out.axpy(dt / 6.0, &full.apply(&k1));
    let mut mid = k2;
    mid.axpy(1.0, &k3);
    out.axpy(dt / 3.0, &half.apply(&mid));
    out.axpy(dt / 6.0, &k4);
    let next = out.into_state(t + dt)?;
    if !next.is_finite() {
        return Err(rejected(t, "nonfinite values"));
    }
    Ok(next)
}

/// Advance the reconstructing gauge `theta' = L^k d* a` over one step by
/// Simpson's rule, given the connection at the start, midpoint and end.
pub fn gauge_ode_step(
    theta: &GaugePhase,
    a_start: &ConnectionForm,
    a_mid: &ConnectionForm,
    a_end: &ConnectionForm,
    dt: f64,
    k: usize,
) -> Result<GaugePhase> {
    let mut th = theta.theta().clone();
    th.axpy(C64::new(dt / 6.0, 0.0), &deturck_driver(a_start, k)?);
    th.axpy(C64::new(4.0 * dt / 6.0, 0.0), &deturck_driver(a_mid, k)?);
    th.axpy(C64::new(dt / 6.0, 0.0), &deturck_driver(a_end, k)?);
    GaugePhase::new(th.real_projection())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowupDetected,
    StepRejected,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::BlowupDetected => "blowup_detected",
            Termination::StepRejected => "step_rejected",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub energy: EnergyBreakdown,
    /// Classical functional with unit curvature coefficient.
    pub sw_total: f64,
    pub sup_phi: f64,
    pub l2_phi: f64,
    pub sup_f: f64,
    /// `||F||_{L^{k+2}}`.
    pub lp_f: f64,
    /// `2||g_phi||^2 + ||g_a||^2`, the instantaneous dissipation rate.
    pub dissipation: f64,
    /// Trapezoidal defect of the energy identity against the previous record.
    pub energy_identity_residual: f64,
}

/// Diagnostics of a single state (identity residual left at zero).
pub fn diagnose(state: &FlowState, step: usize, params: &SwParams) -> Result<DiagnosticsRecord> {
    let energy = sw_energy_k(&state.a, &state.phi, params)?;
    let sw_total = sw_energy(&state.a, &state.phi, params.s0)?.total;
    let f = curvature(&state.a)?;
    let g = gradients(&state.a, &state.phi, params)?;
    Ok(DiagnosticsRecord {
        step,
        t: state.t,
        energy,
        sw_total,
        sup_phi: sup_norm(&state.phi),
        l2_phi: l2_norm(&state.phi),
        sup_f: sup_norm(&f),
        lp_f: lp_norm(&f, params.k as f64 + 2.0)?,
        dissipation: 2.0 * l2_norm_sq(&g.g_phi) + l2_norm_sq(g.g_a.field()),
        energy_identity_residual: 0.0,
    })
}

/// `|(E_1 - E_0)/dt + (D_0 + D_1)/2|` between two consecutive records.
pub fn identity_residual(prev: &DiagnosticsRecord, next: &DiagnosticsRecord) -> f64 {
    let dt = next.t - prev.t;
    if dt <= 0.0 {
        return 0.0;
    }
    ((next.energy.total - prev.energy.total) / dt + 0.5 * (prev.dissipation + next.dissipation)).abs()
}

#[derive(Clone, Debug)]
pub struct TrajectoryEntry {
    pub state: FlowState,
    pub record: DiagnosticsRecord,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub params: SwParams,
    pub dt: f64,
    /// Retained states at snapshot cadence, always including the first and last.
    pub entries: Vec<TrajectoryEntry>,
    /// Diagnostics at report cadence.
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    /// Reason attached to a rejected step.
    pub message: Option<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.state.t).collect()
    }

    pub fn last_state(&self) -> &FlowState {
        &self.entries.last().expect("trajectory holds its initial state").state
    }
}

/// Integrate from `initial` under `config`.
pub fn run_flow_from(config: &FlowConfig, initial: FlowState) -> Result<Trajectory> {
    config.validate()?;
    let params = config.params();
    let mut state = initial;
    if config.integrator == Integrator::ImexDeturck && state.theta.is_none() {
        state.theta = Some(GaugePhase::zeros(state.grid()));
    }
    let t0 = state.t;
    let n_steps = if config.t_end <= t0 {
        0
    } else {
        ((config.t_end - t0) / config.dt - 1e-9).ceil() as usize
    };
    let first = diagnose(&state, 0, &params)?;
    let mut traj = Trajectory {
        params,
        dt: config.dt,
        entries: vec![TrajectoryEntry { state: state.clone(), record: first.clone() }],
        records: vec![first.clone()],
        termination: Termination::Completed,
        message: None,
    };
    let mut last_record = first;
    for step in 1..=n_steps {
        let target = if step == n_steps { config.t_end } else { t0 + step as f64 * config.dt };
        let h = target - state.t;
        let next = match config.integrator {
            Integrator::ImexDeturck => step_imex(&state, h, &params),
            Integrator::Rk4Direct => step_rk4(&state, RhsKind::Direct, h, &params),
        };
        let mut next = match next {
            Ok(s) => s,
            Err(Error::StepRejected { reason, .. }) => {
                traj.termination = Termination::StepRejected;
                traj.message = Some(reason);
                break;
            }
            Err(e) => return Err(e),
        };
        next.t = target;
        let sup_f = sup_norm(&curvature(&next.a)?);
        let blowup = !(sup_f <= config.blowup_ceiling);
        let report = step % config.output.report_every == 0 || step == n_steps || blowup;
        let snapshot = step % config.output.snapshot_every == 0 || step == n_steps || blowup;
        if report || snapshot {
            let mut rec = diagnose(&next, step, &params)?;
            rec.energy_identity_residual = identity_residual(&last_record, &rec);
            if report {
                traj.records.push(rec.clone());
                last_record = rec.clone();
            }
            if snapshot {
                traj.entries.push(TrajectoryEntry { state: next.clone(), record: rec });
            }
        }
        state = next;
        if blowup {
            traj.termination = Termination::BlowupDetected;
            break;
        }
    }
    Ok(traj)
}

pub fn run_flow(config: &FlowConfig) -> Result<Trajectory> {
    run_flow_from(config, config.initial_state()?)
}

/// Undo the gauge fixing: apply `e^{i theta(t)}` to every retained state.
pub fn deturck_to_flow(traj: &Trajectory) -> Result<Trajectory> {
    let mut out = traj.clone();
    for e in &mut out.entries {
        let theta = e.state.theta.take().ok_or_else(|| {
            Error::InvalidArgument("trajectory carries no gauge accumulator".into())
        })?;
        let (a, phi) = gauge_transform(&theta, &e.state.a, &e.state.phi)?;
        e.state.a = a;
        e.state.phi = phi;
        e.record.sup_phi = sup_norm(&e.state.phi);
        e.record.l2_phi = l2_norm(&e.state.phi);
    }
    Ok(out)
}

/// `(||phi_dot + g_phi|| + ||a_dot + g_a||) / (||g_phi|| + ||g_a||)`, with 0/0 read as 0.
pub fn residual_flow(
    state: &FlowState,
    phi_dot: &Field,
    a_dot: &Field,
    params: &SwParams,
) -> Result<f64> {
    let g = gradients(&state.a, &state.phi, params)?;
    let rp = l2_norm(&(phi_dot + &g.g_phi));
    let ra = l2_norm(&(a_dot + g.g_a.field()));
    let scale = l2_norm(&g.g_phi) + l2_norm(g.g_a.field());
    if scale == 0.0 {
        return Ok(if rp + ra == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((rp + ra) / scale)
}

/// Centered-difference rates at interior entry `j`.
pub fn centered_rates(traj: &Trajectory, j: usize) -> Result<(Field, Field)> {
    if j == 0 || j + 1 >= traj.entries.len() {
        return Err(Error::InsufficientData(format!(
            "entry {j} has no neighbours among {} states",
            traj.entries.len()
        )));
    }
    let (p, n) = (&traj.entries[j - 1].state, &traj.entries[j + 1].state);
    let inv = C64::new(1.0 / (n.t - p.t), 0.0);
    Ok(((&n.phi - &p.phi).scaled(inv), (n.a.field() - p.a.field()).scaled(inv)))
}

/// Residuals `(t, residual_flow)` at every interior retained state.
pub fn trajectory_residuals(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if traj.entries.len() < 3 {
        return Err(Error::InsufficientData("need at least three retained states".into()));
    }
    (1..traj.entries.len() - 1)
        .map(|j| {
            let (pd, ad) = centered_rates(traj, j)?;
            let s = &traj.entries[j].state;
            Ok((s.t, residual_flow(s, &pd, &ad, &traj.params)?))
        })
        .collect()
}

/// Largest trajectory residual.
pub fn max_residual(traj: &Trajectory) -> Result<f64> {
    Ok(trajectory_residuals(traj)?.into_iter().map(|(_, r)| r).fold(0.0, f64::max))
}

/// Energy-identity defect of one step of size `dt` from `state`, using the
/// configured integrator. Halving `dt` should shrink it about fourfold.
pub fn one_step_identity_residual(
    state: &FlowState,
    dt: f64,
    integrator: Integrator,
    params: &SwParams,
) -> Result<f64> {
    let next = match integrator {
        Integrator::ImexDeturck => step_imex(state, dt, params)?,
        Integrator::Rk4Direct => step_rk4(state, RhsKind::Direct, dt, params)?,
    };
    let a = diagnose(state, 0, params)?;
    let b = diagnose(&next, 1, params)?;
    Ok(identity_residual(&a, &b))
}
