//! Scaling, concentration and boundedness diagnostics over trajectories.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffgeo::{coulomb_project, curvature, nabla_tower};
use crate::error::{Error, Result};
use crate::field::{ConnectionForm, Field, GaugePhase, C64};
use crate::flow::{residual_flow, FlowState, Trajectory};
use crate::functional::SwParams;
use crate::grid::TorusGrid;
use crate::norms::{argmax_norm, ball_lp_norm, l2_norm_sq, sup_norm, BumpWeight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionClass {
    Subcritical,
    Critical,
    Supercritical,
}

/// Compare the dimension with the critical value `2(k+2)`.
pub fn classify_dimension(n: usize, k: usize) -> DimensionClass {
    let critical = 2 * (k + 2);
    match n.cmp(&critical) {
        std::cmp::Ordering::Less => DimensionClass::Subcritical,
        std::cmp::Ordering::Equal => DimensionClass::Critical,
        std::cmp::Ordering::Greater => DimensionClass::Supercritical,
    }
}

/// `(2p - n) / (2k + 2)`: the power of the parabolic factor picked up by
/// `||F||_{L^p}^p` under rescaling.
pub fn scaling_exponent(n: usize, p: f64, k: usize) -> f64 {
    (2.0 * p - n as f64) / (2.0 * k as f64 + 2.0)
}

/// Spatial dilation `lambda` about `center`, with time measured from `base_time`.
///
/// A field `X` maps to `lambda X(center + lambda x)` on the torus with periods
/// divided by `lambda`, and times to `(t - base_time) / lambda^{2k+2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleParams {
    pub lambda: f64,
    pub center: Vec<f64>,
    pub base_time: f64,
    pub k: usize,
}

impl RescaleParams {
    pub fn spatial(lambda: f64, center: Vec<f64>, base_time: f64, k: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda, center, base_time, k })
    }

    /// Parametrized by the time factor: spatial factor `lambda_t^{1/(2k+2)}`.
    pub fn parabolic(lambda_t: f64, center: Vec<f64>, base_time: f64, k: usize) -> Result<Self> {
        if !(lambda_t > 0.0 && lambda_t.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda_t}")));
        }
        Self::spatial(lambda_t.powf(1.0 / (2.0 * k as f64 + 2.0)), center, base_time, k)
    }

    pub fn time_factor(&self) -> f64 {
        self.lambda.powi(2 * self.k as i32 + 2)
    }

    pub fn scaled_time(&self, t: f64) -> f64 {
        (t - self.base_time) / self.time_factor()
    }
}

/// `x -> f(x + offset)`: an exact roll when the offset is a lattice vector,
/// otherwise a spectral translation.
fn translate(f: &Field, offset: &[f64]) -> Field {
    let g = f.grid();
    let n = g.dim();
    let mut shifts = vec![0i64; n];
    let mut on_lattice = true;
    for a in 0..n {
        let h = g.spacing(a);
        let m = (offset[a] / h).round();
        if (offset[a] - m * h).abs() > 1e-12 * h.max(1.0) {
            on_lattice = false;
        }
        shifts[a] = m as i64;
    }
    if on_lattice {
        if shifts.iter().all(|&m| m == 0) {
            return f.clone();
        }
        let sizes = g.sizes().to_vec();
        let ns = g.n_sites();
        let mut out = f.zeros_like();
        let src_of: Vec<usize> = (0..ns)
            .map(|site| {
                let idx = g.multi_index(site);
                let moved: Vec<usize> = idx
                    .iter()
                    .zip(&shifts)
                    .zip(&sizes)
                    .map(|((i, m), nn)| (*i as i64 + m).rem_euclid(*nn as i64) as usize)
                    .collect();
                g.site_of(&moved)
            })
            .collect();
        for c in 0..f.n_comps() {
            let src = f.plane(c);
            for (o, s) in out.plane_mut(c).iter_mut().zip(&src_of) {
                *o = src[*s];
            }
        }
        out
    } else {
        let ks: Vec<Vec<f64>> = (0..n).map(|a| g.wavenumbers(a).to_vec()).collect();
        f.spectral_multiply(|s| {
            let phase: f64 = (0..n).map(|a| ks[a][s] * offset[a]).sum();
            C64::from_polar(1.0, phase)
        })
    }
}

fn relabel(f: &Field, grid: &TorusGrid, offset: &[f64], amplitude: f64) -> Result<Field> {
    let moved = translate(f, offset);
    let data = moved.data().iter().map(|v| v * amplitude).collect();
    Ok(Field::from_data(grid, f.rank(), f.spinor_rank(), data)?.with_form_degree(f.form_degree()))
}

/// Apply the rescaling to a state; valid for every `lambda > 0`.
pub fn lambda_scale(state: &FlowState, params: &RescaleParams) -> Result<FlowState> {
    let g = state.grid();
    if params.center.len() != g.dim() {
        return Err(Error::InvalidArgument("rescaling center has the wrong dimension".into()));
    }
    let lambda = params.lambda;
    let lengths: Vec<f64> = g.lengths().iter().map(|l| l / lambda).collect();
    let new_grid = g.with_lengths(&lengths)?;
    let c = &params.center;
    let phi = relabel(&state.phi, &new_grid, c, lambda)?;
    let a = ConnectionForm::project(relabel(state.a.field(), &new_grid, c, lambda)?)?;
    let theta = match &state.theta {
        Some(th) => Some(GaugePhase::new(relabel(th.theta(), &new_grid, c, 1.0)?.real_projection())?),
        None => None,
    };
    Ok(FlowState { phi, a, t: params.scaled_time(state.t), theta })
}

/// Largest residual of the rescaled trajectory against the rescaled system,
/// with centered differences in the rescaled time.
pub fn scaled_residual(traj: &Trajectory, params: &RescaleParams) -> Result<f64> {
    let entries = &traj.entries;
    if entries.len() < 3 {
        return Err(Error::InsufficientData("need at least three retained states".into()));
    }
    let scaled: Vec<FlowState> =
        entries.iter().map(|e| lambda_scale(&e.state, params)).collect::<Result<_>>()?;
    let sys = traj.params.rescaled(params.lambda);
    let worst = (1..scaled.len() - 1)
        .into_par_iter()
        .map(|j| {
            let (p, n) = (&scaled[j - 1], &scaled[j + 1]);
            let inv = C64::new(1.0 / (n.t - p.t), 0.0);
            let pd = (&n.phi - &p.phi).scaled(inv);
            let ad = (n.a.field() - p.a.field()).scaled(inv);
            residual_flow(&scaled[j], &pd, &ad, &sys)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub t: f64,
    pub center: usize,
    pub radius: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub p: f64,
    pub epsilon: f64,
    pub radii: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    /// One row per (time, center, radius), times ascending, radii as given.
    pub rows: Vec<ConcentrationRow>,
    /// Indices into `centers`.
    pub flagged: Vec<usize>,
}

impl ConcentrationReport {
    pub fn to_csv(&self) -> String {
        let n = self.centers.first().map_or(0, |c| c.len());
        let mut out = String::from("t,center_index");
        for a in 0..n {
            let _ = write!(out, ",x{a}");
        }
        out.push_str(",radius,value,flagged\n");
        for r in &self.rows {
            let _ = write!(out, "{:.16e},{}", r.t, r.center);
            for x in &self.centers[r.center] {
                let _ = write!(out, ",{x:.16e}");
            }
            let flag = self.flagged.contains(&r.center) as u8;
            let _ = writeln!(out, ",{:.16e},{:.16e},{flag}", r.radius, r.value);
        }
        out
    }
}

/// Coarse sublattice (every quarter period on each axis) plus the argmax
/// of `|F|` in every snapshot, without duplicates.
pub fn default_centers(snapshots: &[(f64, Field)]) -> Vec<Vec<f64>> {
    let Some((_, first)) = snapshots.first() else {
        return Vec::new();
    };
    let g = first.grid();
    let n = g.dim();
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let per_axis = 4usize;
    let total = per_axis.pow(n as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut x = vec![0.0; n];
        for a in (0..n).rev() {
            let i = rem % per_axis;
            rem /= per_axis;
            x[a] = g.lengths()[a] * i as f64 / per_axis as f64;
        }
        centers.push(x);
    }
    for (_, f) in snapshots {
        let (site, _) = argmax_norm(f);
        let x = g.site_coords(site);
        if !centers.iter().any(|c| g.torus_distance(c, &x) < 1e-12) {
            centers.push(x);
        }
    }
    centers
}

/// Local `L^p` norms of curvature snapshots on shrinking balls.
pub fn concentration_scan(
    snapshots: &[(f64, Field)],
    p: f64,
    radii: &[f64],
    centers: Option<&[Vec<f64>]>,
    epsilon: f64,
) -> Result<ConcentrationReport> {
    if snapshots.is_empty() {
        return Err(Error::InsufficientData("no curvature snapshots".into()));
    }
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    if radii.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidArgument("radii must be strictly descending".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must satisfy p >= 1, got {p}")));
    }
    let centers: Vec<Vec<f64>> = match centers {
        Some(c) => c.to_vec(),
        None => default_centers(snapshots),
    };
    let mut order: Vec<usize> = (0..snapshots.len()).collect();
    order.sort_by(|&i, &j| snapshots[i].0.total_cmp(&snapshots[j].0));
    let jobs: Vec<(usize, usize, usize)> = order
        .iter()
        .flat_map(|&s| (0..centers.len()).flat_map(move |c| (0..radii.len()).map(move |r| (s, c, r))))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(s, c, r)| {
            let (t, f) = &snapshots[s];
            Ok(ConcentrationRow { t: *t, center: c, radius: radii[r], value: ball_lp_norm(f, &centers[c], radii[r], p)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let latest = *order.last().unwrap();
    let smallest = *radii.last().unwrap();
    let t_latest = snapshots[latest].0;
    let flagged = rows
        .iter()
        .filter(|r| r.t == t_latest && r.radius == smallest && r.value > epsilon)
        .map(|r| r.center)
        .collect();
    Ok(ConcentrationReport { p, epsilon, radii: radii.to_vec(), centers, rows, flagged })
}

/// Rescaled states at the times where the running maximum of `sup |F|` grows.
///
/// Each state is dilated about its curvature maximum with spatial factor
/// `sup|F|^{-1/2}`, so the output curvature has unit sup norm, and is then
/// put in Coulomb gauge. At most `count` of the latest such states are kept.
pub fn blowup_sequence(traj: &Trajectory, count: usize) -> Result<Vec<FlowState>> {
    let mut running = f64::NEG_INFINITY;
    let mut picks = Vec::new();
    for (j, e) in traj.entries.iter().enumerate() {
        let f = curvature(&e.state.a)?;
        let (site, sup) = argmax_norm(&f);
        if sup > running {
            if j > 0 {
                picks.push((j, site, sup));
            }
            running = sup;
        }
    }
    picks.retain(|p| p.2 > 0.0);
    if picks.is_empty() {
        return Err(Error::InsufficientData("curvature never grows along the trajectory".into()));
    }
    let start = picks.len().saturating_sub(count);
    picks[start..]
        .iter()
        .map(|&(j, site, sup)| {
            let st = &traj.entries[j].state;
            let x = st.grid().site_coords(site);
            let params = RescaleParams::spatial(sup.powf(-0.5), x, st.t, traj.params.k)?;
            let mut scaled = lambda_scale(st, &params)?;
            let (a, gauge) = coulomb_project(&scaled.a)?;
            scaled.phi = crate::diffgeo::gauge_act(&gauge, &scaled.phi);
            scaled.a = a;
            scaled.theta = None;
            Ok(scaled)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinorMonitorReport {
    pub s0: f64,
    pub epsilon: f64,
    /// `sqrt(|min(S0, 0)|) + epsilon`.
    pub level: f64,
    /// Level actually enforced: `level`, or the initial sup plus `epsilon` if that is higher.
    pub threshold: f64,
    pub times: Vec<f64>,
    pub sup_phi: Vec<f64>,
    pub first_flag: Option<f64>,
}

impl SpinorMonitorReport {
    pub fn flagged(&self) -> bool {
        self.first_flag.is_some()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,sup_phi,threshold,flag\n");
        for (t, s) in self.times.iter().zip(&self.sup_phi) {
            let _ = writeln!(out, "{t:.16e},{s:.16e},{:.16e},{}", self.threshold, (*s > self.threshold) as u8);
        }
        out
    }
}

/// Default tolerance `1e-3 (1 + sqrt|S0|)`.
pub fn monitor_epsilon(s0: f64) -> f64 {
    1e-3 * (1.0 + s0.abs().sqrt())
}

/// Track `sup |phi|` over the report series of a trajectory.
pub fn spinor_bound_monitor(traj: &Trajectory, s0: f64) -> SpinorMonitorReport {
    let epsilon = monitor_epsilon(s0);
    let level = s0.min(0.0).abs().sqrt() + epsilon;
    let times: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
    let sup_phi: Vec<f64> = traj.records.iter().map(|r| r.sup_phi).collect();
    let initial = sup_phi.first().copied().unwrap_or(0.0);
    let threshold = if initial < level { level } else { initial + epsilon };
    let first_flag = times.iter().zip(&sup_phi).find(|(_, s)| **s > threshold).map(|(t, _)| *t);
    SpinorMonitorReport { s0, epsilon, level, threshold, times, sup_phi, first_flag }
}

/// `||gamma^{s/2} nabla_A^{(l)} phi||^2 + ||gamma^{s/2} nabla^{(l)} F||^2`; needs `s >= 2(k + l)`.
pub fn weighted_local_energy(state: &FlowState, w: &BumpWeight, l: usize, params: &SwParams) -> Result<f64> {
    let need = 2.0 * (params.k + l) as f64;
    if w.s() < need {
        return Err(Error::InvalidArgument(format!(
            "weight exponent s = {} is below 2(k + l) = {need}",
            w.s()
        )));
    }
    let weight = w.weight();
    let spin = nabla_tower(Some(&state.a), &state.phi, l, params.dealias)?.pop().unwrap();
    let curv = nabla_tower(None, &curvature(&state.a)?, l, false)?.pop().unwrap();
    Ok(l2_norm_sq(&spin.mul_pointwise(&weight)) + l2_norm_sq(&curv.mul_pointwise(&weight)))
}

/// `sup |F|` of a state.
pub fn sup_curvature(state: &FlowState) -> Result<f64> {
    Ok(sup_norm(&curvature(&state.a)?))
}
