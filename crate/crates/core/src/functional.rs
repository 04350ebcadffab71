//! Energies with `k` extra derivatives and their exact discrete gradients.
//!
//! Gradient conventions: for a spinor direction `psi`,
//! `dE[psi] = 2 Re <psi, g_phi>`; for an imaginary 1-form direction `B`,
//! `dE[B] = Re <B, g_a>`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffgeo::{curvature, exterior_d, nabla, nabla_adjoint, nabla_tower, codifferential};
use crate::error::{Error, Result};
use crate::field::{ConnectionForm, Field, C64, ZERO};
use crate::norms::{l2_inner, l2_norm_sq};
use crate::random::{random_band_limited, random_form};

/// Couplings of the functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwParams {
    /// Derivative order `k >= 0`.
    pub k: usize,
    /// Constant scalar curvature `S0`.
    pub s0: f64,
    /// Coefficient multiplying the quartic density (1 for the unscaled system).
    pub quartic: f64,
    /// Apply the 2/3-rule projection to every pointwise product.
    pub dealias: bool,
}

impl SwParams {
    pub fn new(k: usize, s0: f64) -> Self {
        Self { k, s0, quartic: 1.0, dealias: true }
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    /// Couplings of the system satisfied by the `lambda`-rescaled fields:
    /// `S0 -> lambda^{2k+2} S0` and quartic coefficient `lambda^{2k}`.
    pub fn rescaled(&self, lambda: f64) -> Self {
        let k = self.k as i32;
        Self {
            s0: self.s0 * lambda.powi(2 * k + 2),
            quartic: self.quartic * lambda.powi(2 * k),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub curvature_term: f64,
    pub dirichlet_term: f64,
    pub scalar_term: f64,
    pub quartic_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_parts(curvature_term: f64, dirichlet_term: f64, scalar_term: f64, quartic_term: f64) -> Self {
        Self {
            curvature_term,
            dirichlet_term,
            scalar_term,
            quartic_term,
            total: curvature_term + dirichlet_term + scalar_term + quartic_term,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradientPair {
    pub g_phi: Field,
    pub g_a: ConnectionForm,
}

fn check_pair(a: &ConnectionForm, phi: &Field) -> Result<()> {
    if a.grid() != phi.grid() {
        return Err(Error::ShapeMismatch("connection and spinor live on different grids".into()));
    }
    if phi.rank() != 0 {
        return Err(Error::ShapeMismatch(format!("spinor must have rank 0, got {}", phi.rank())));
    }
    Ok(())
}

/// Pointwise `|phi|^2` as a real scalar field, projected when dealiasing.
fn density(phi: &Field, dealias: bool) -> Field {
    let rho = phi.pointwise_norm_sq();
    let f = Field::from_data(phi.grid(), 0, 1, rho.into_iter().map(|v| C64::new(v, 0.0)).collect())
        .expect("density has scalar shape");
    if dealias {
        f.dealiased().real_projection()
    } else {
        f
    }
}

fn quartic_energy(phi: &Field, coeff: f64, dealias: bool) -> f64 {
    if coeff == 0.0 {
        return 0.0;
    }
    coeff / 8.0 * l2_norm_sq(&density(phi, dealias))
}

/// Classical functional `||F||^2 + ||nabla_A phi||^2 + (S0/4)||phi||^2 + (1/8)||phi||_4^4`.
pub fn sw_energy(a: &ConnectionForm, phi: &Field, s0: f64) -> Result<EnergyBreakdown> {
    check_pair(a, phi)?;
    let f = curvature(a)?;
    let grad = nabla(Some(a), phi, false)?;
    Ok(EnergyBreakdown::from_parts(
        l2_norm_sq(&f),
        l2_norm_sq(&grad),
        s0 / 4.0 * l2_norm_sq(phi),
        quartic_energy(phi, 1.0, false),
    ))
}

/// `SW^k = 1/2 ||nabla^{(k)} F||^2 + ||nabla_A^{(k+1)} phi||^2 + (S0/4)||phi||^2 + quartic`.
pub fn sw_energy_k(a: &ConnectionForm, phi: &Field, params: &SwParams) -> Result<EnergyBreakdown> {
    check_pair(a, phi)?;
    let f = curvature(a)?;
    let curv = nabla_tower(None, &f, params.k, false)?.pop().unwrap();
    let x = nabla_tower(Some(a), phi, params.k + 1, params.dealias)?.pop().unwrap();
    Ok(EnergyBreakdown::from_parts(
        0.5 * l2_norm_sq(&curv),
        l2_norm_sq(&x),
        params.s0 / 4.0 * l2_norm_sq(phi),
        quartic_energy(phi, params.quartic, params.dealias),
    ))
}

/// Curvature part of the connection gradient, `d* (nabla^*)^k nabla^{(k)} F`.
fn curvature_gradient(a: &ConnectionForm, k: usize) -> Result<Field> {
    let f = curvature(a)?;
    let mut cur = nabla_tower(None, &f, k, false)?.pop().unwrap();
    for _ in 0..k {
        cur = nabla_adjoint(None, &cur, false)?;
    }
    codifferential(&cur)
}

/// Both gradients, sharing the covariant-derivative tower.
pub fn gradients(a: &ConnectionForm, phi: &Field, params: &SwParams) -> Result<GradientPair> {
    check_pair(a, phi)?;
    let k = params.k;
    let dealias = params.dealias;
    let g = phi.grid();
    let ns = g.n_sites();
    let n = g.dim();

    let tower = nabla_tower(Some(a), phi, k + 1, dealias)?;
    // z[j] = (nabla^*)^{k-j} X for j = k..0, then one more adjoint for the spinor gradient.
    let mut z = tower[k + 1].clone();
    let mut moment = vec![ZERO; n * ns];
    for j in (0..=k).rev() {
        let y = &tower[j];
        let pz = if dealias { z.dealiased() } else { z.clone() };
        let cy = y.n_comps();
        for i in 0..n {
            let dst = &mut moment[i * ns..(i + 1) * ns];
            for c in 0..cy {
                let zp = pz.plane(i * cy + c);
                let yp = y.plane(c);
                for ((o, zv), yv) in dst.iter_mut().zip(zp).zip(yp) {
                    *o += zv * yv.conj();
                }
            }
        }
        z = nabla_adjoint(Some(a), &z, dealias)?;
    }
    let mut g_phi = z;
    if params.s0 != 0.0 {
        g_phi.axpy(C64::new(params.s0 / 4.0, 0.0), phi);
    }
    if params.quartic != 0.0 {
        let rho = density(phi, dealias);
        let term = phi.mul_pointwise(&rho);
        g_phi.axpy(C64::new(params.quartic / 4.0, 0.0), &term);
    }

    let mut g_a = curvature_gradient(a, k)?;
    for (o, m) in g_a.data_mut().iter_mut().zip(&moment) {
        *o += m * 2.0;
    }
    Ok(GradientPair { g_phi, g_a: ConnectionForm::project(g_a)? })
}

pub fn grad_spinor(a: &ConnectionForm, phi: &Field, params: &SwParams) -> Result<Field> {
    Ok(gradients(a, phi, params)?.g_phi)
}

pub fn grad_connection(a: &ConnectionForm, phi: &Field, params: &SwParams) -> Result<ConnectionForm> {
    Ok(gradients(a, phi, params)?.g_a)
}

/// Worst relative errors of a finite-difference check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub rel_err_phi: f64,
    pub rel_err_a: f64,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.rel_err_phi.max(self.rel_err_a)
    }
}

pub const MIN_FD_STEP: f64 = 1e-6;
pub const MAX_FD_STEP: f64 = 1e-3;

/// Compare central differences of [`sw_energy_k`] along random band-limited
/// directions with the analytic directional derivatives of [`gradients`].
pub fn fd_gradient_check(
    a: &ConnectionForm,
    phi: &Field,
    params: &SwParams,
    h: f64,
    num_directions: usize,
    seed: u64,
) -> Result<GradCheck> {
    fd_gradient_check_with(a, phi, params, h, num_directions, seed, gradients)
}

/// [`fd_gradient_check`] against a caller-supplied gradient.
pub fn fd_gradient_check_with<G>(
    a: &ConnectionForm,
    phi: &Field,
    params: &SwParams,
    h: f64,
    num_directions: usize,
    seed: u64,
    grad: G,
) -> Result<GradCheck>
where
    G: Fn(&ConnectionForm, &Field, &SwParams) -> Result<GradientPair>,
{
    if !(MIN_FD_STEP..=MAX_FD_STEP).contains(&h) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step h = {h} outside [{MIN_FD_STEP}, {MAX_FD_STEP}]"
        )));
    }
    check_pair(a, phi)?;
    let g = phi.grid();
    let kmax = ((*g.sizes().iter().min().unwrap() - 1) / 3).min(3);
    let pair = grad(a, phi, params)?;
    let energy = |a: &ConnectionForm, p: &Field| sw_energy_k(a, p, params).map(|e| e.total);

    let errs: Vec<Result<(f64, f64)>> = (0..num_directions as u64)
        .into_par_iter()
        .map(|d| {
            let dir_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(2 * d + 1);
            let psi = random_band_limited(g, 0, phi.spinor_rank(), kmax, dir_seed, 1.0)?;
            let mut plus = phi.clone();
            plus.axpy(C64::new(h, 0.0), &psi);
            let mut minus = phi.clone();
            minus.axpy(C64::new(-h, 0.0), &psi);
            let fd = (energy(a, &plus)? - energy(a, &minus)?) / (2.0 * h);
            let an = 2.0 * l2_inner(&psi, &pair.g_phi)?.re;
            let e_phi = relative_gap(fd, an);

            let b = ConnectionForm::from_real_form(&random_form(g, 1, kmax, dir_seed + 1, 1.0)?)?;
            let mut ap = a.field().clone();
            ap.axpy(C64::new(h, 0.0), b.field());
            let mut am = a.field().clone();
            am.axpy(C64::new(-h, 0.0), b.field());
            let fd = (energy(&ConnectionForm::project(ap)?, phi)?
                - energy(&ConnectionForm::project(am)?, phi)?)
                / (2.0 * h);
            let an = l2_inner(b.field(), pair.g_a.field())?.re;
            Ok((e_phi, relative_gap(fd, an)))
        })
        .collect();
    let mut out = GradCheck::default();
    for e in errs {
        let (ep, ea) = e?;
        out.rel_err_phi = out.rel_err_phi.max(ep);
        out.rel_err_a = out.rel_err_a.max(ea);
    }
    Ok(out)
}

fn relative_gap(fd: f64, an: f64) -> f64 {
    let scale = fd.abs().max(an.abs());
    if scale == 0.0 {
        0.0
    } else {
        (fd - an).abs() / scale
    }
}

/// `d` applied to a real scalar, returned as the imaginary 1-form `i d theta`.
pub fn pure_gauge_form(theta: &Field) -> Result<ConnectionForm> {
    let d = exterior_d(theta)?.real_projection();
    ConnectionForm::from_real_form(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::norms::{l2_norm, sup_norm};
    use crate::random::random_connection;
    use std::f64::consts::PI;

    fn t2(n: usize) -> TorusGrid {
        TorusGrid::periodic(&[n, n]).unwrap()
    }

    fn a_sin(g: &TorusGrid) -> ConnectionForm {
        ConnectionForm::project(Field::from_fn(g, 1, 1, |x, c| {
            if c == 1 { C64::new(0.0, x[0].sin()) } else { ZERO }
        }))
        .unwrap()
    }

    #[test]
    fn classical_energy_examples() {
        let g = t2(16);
        let z = ConnectionForm::zeros(&g);
        let e = sw_energy(&z, &Field::zeros(&g, 0, 1), 0.0).unwrap();
        assert_eq!(e.total, 0.0);
        let c = C64::new(0.6, -0.8) * 1.5;
        let phi = Field::from_fn(&g, 0, 1, |_, _| c);
        let e = sw_energy(&z, &phi, 0.0).unwrap();
        let expect = c.norm().powi(4) / 8.0 * g.volume();
        assert!((e.total - expect).abs() < 1e-12 * expect);
        let e = sw_energy(&a_sin(&g), &Field::zeros(&g, 0, 1), 0.0).unwrap();
        assert!((e.total - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn higher_energy_examples() {
        let g = t2(16);
        let a = a_sin(&g);
        let zero = Field::zeros(&g, 0, 1);
        let e0 = sw_energy_k(&a, &zero, &SwParams::new(0, 0.0)).unwrap();
        assert!((e0.total - PI * PI).abs() < 1e-12);
        // k = 1: nabla F has components d_1 F_12 = -i sin, d_1 F_21 = i sin;
        // brute-force quadrature with the 1/2! form weight.
        let e1 = sw_energy_k(&a, &zero, &SwParams::new(1, 0.0)).unwrap();
        let h = g.cell_volume();
        let mut oracle = 0.0;
        for s in 0..g.n_sites() {
            let x = g.site_coords(s);
            let comps = [x[0].sin(), -x[0].sin()];
            oracle += comps.iter().map(|v| v * v).sum::<f64>() / 2.0 * h;
        }
        assert!((e1.curvature_term - 0.5 * oracle).abs() < 1e-12);
        assert!((e1.total - PI * PI).abs() < 1e-12);
        let z = sw_energy_k(&ConnectionForm::zeros(&g), &zero, &SwParams::new(2, -1.0)).unwrap();
        assert_eq!(z.total, 0.0);
    }

    #[test]
    fn breakdown_sums() {
        let g = t2(16);
        let a = random_connection(&g, 2, 3, 0.4).unwrap();
        let phi = random_band_limited(&g, 0, 2, 2, 4, 0.7).unwrap();
        let e = sw_energy_k(&a, &phi, &SwParams::new(1, -1.0)).unwrap();
        let sum = e.curvature_term + e.dirichlet_term + e.scalar_term + e.quartic_term;
        assert_eq!(e.total, sum);
        assert!(e.curvature_term >= 0.0 && e.dirichlet_term >= 0.0 && e.quartic_term >= 0.0);
    }

    #[test]
    fn spinor_gradient_examples() {
        let g = t2(16);
        let z = ConnectionForm::zeros(&g);
        let p = SwParams::new(0, 0.0);
        assert_eq!(sup_norm(&grad_spinor(&z, &Field::zeros(&g, 0, 1), &p).unwrap()), 0.0);
        let c = C64::new(0.3, 0.9);
        let konst = Field::from_fn(&g, 0, 1, |_, _| c);
        let gk = grad_spinor(&z, &konst, &p).unwrap();
        assert!((gk.get(3, 0) - c * c.norm_sqr() / 4.0).norm() < 1e-14);
        let wave = Field::from_fn(&g, 0, 1, |x, _| c * C64::from_polar(1.0, x[0]));
        let gw = grad_spinor(&z, &wave, &p).unwrap();
        let expect = wave.scaled(C64::new(1.0 + c.norm_sqr() / 4.0, 0.0));
        assert!(sup_norm(&(&gw - &expect)) < 1e-13);
    }

    #[test]
    fn connection_gradient_examples() {
        let g = t2(16);
        let z = ConnectionForm::zeros(&g);
        let zero = Field::zeros(&g, 0, 1);
        assert_eq!(sup_norm(grad_connection(&z, &zero, &SwParams::new(1, 0.0)).unwrap().field()), 0.0);
        // d* of F = i cos(x^1) dx^1 ^ dx^2: (d*F)_2 = -d_1 F_12 = i sin(x^1).
        let ga = grad_connection(&a_sin(&g), &zero, &SwParams::new(0, 0.0)).unwrap();
        let expect = a_sin(&g);
        assert!(sup_norm(&(ga.field() - expect.field())) < 1e-12);
        assert_eq!(ga.max_abs_re(), 0.0);
    }

    #[test]
    fn finite_difference_agreement() {
        let g = t2(16);
        let a = random_connection(&g, 2, 5, 0.5).unwrap();
        let phi = random_band_limited(&g, 0, 1, 2, 6, 0.8).unwrap();
        for k in 0..=2 {
            for dealias in [false, true] {
                let p = SwParams::new(k, -1.0).with_dealias(dealias);
                let r = fd_gradient_check(&a, &phi, &p, 1e-4, 4, 0).unwrap();
                assert!(r.worst() < 1e-6, "k = {k} dealias = {dealias}: {r:?}");
            }
        }
        let zero = fd_gradient_check(&ConnectionForm::zeros(&g), &Field::zeros(&g, 0, 1),
            &SwParams::new(1, 0.0), 1e-4, 2, 0).unwrap();
        assert!(zero.rel_err_phi < 1e-6 && zero.rel_err_a == 0.0);
        assert!(fd_gradient_check(&a, &phi, &SwParams::new(0, 0.0), 1e-2, 1, 0).is_err());
    }

    #[test]
    fn sabotaged_gradient_fails_check() {
        let g = t2(16);
        let a = random_connection(&g, 2, 5, 0.5).unwrap();
        let phi = random_band_limited(&g, 0, 1, 2, 6, 0.8).unwrap();
        let flipped = |a: &ConnectionForm, p: &Field, s: &SwParams| {
            let gp = gradients(a, p, s)?;
            Ok(GradientPair { g_phi: -&gp.g_phi, g_a: ConnectionForm::project(-gp.g_a.field())? })
        };
        let r = fd_gradient_check_with(&a, &phi, &SwParams::new(1, 0.0), 1e-4, 2, 0, flipped).unwrap();
        assert!(r.worst() > 1.0);
    }

    #[test]
    fn rescaled_params() {
        let p = SwParams::new(1, -2.0).rescaled(2.0);
        assert_eq!(p.s0, -32.0);
        assert_eq!(p.quartic, 4.0);
        let p0 = SwParams::new(0, 1.0).rescaled(3.0);
        assert_eq!((p0.s0, p0.quartic), (9.0, 1.0));
    }

    #[test]
    fn pure_gauge_form_is_flat() {
        let g = t2(16);
        let th = crate::random::random_gauge(&g, 2, 1, 1.0).unwrap();
        let a = pure_gauge_form(th.theta()).unwrap();
        assert!(l2_norm(&curvature(&a).unwrap()) < 1e-12);
    }
}
