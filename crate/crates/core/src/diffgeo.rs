//! Exterior and gauge-covariant calculus on the flat torus.
//!
//! Every operator is spectral in its derivative part and pointwise in its
//! connection part. Adjoints are the exact discrete adjoints of the forward
//! operators under [`l2_inner`](crate::norms::l2_inner): the derivative
//! multiplier `i k` is conjugated and each pointwise multiplication by `A_i`
//! (followed, when dealiasing is on, by the 2/3-rule projection `P`) becomes
//! `P` followed by multiplication with `conj(A_i)`.

use crate::error::{Error, Result};
use crate::field::{
    factorial, forward_planes, inverse_planes, spectral_gradient, ConnectionForm, Field,
    GaugePhase, C64, I, ZERO,
};

/// Antisymmetrize all indices of a tensor field; the result is a form of
/// degree `rank` with `omega_I = (1/d!) sum_sigma sign(sigma) T_{sigma(I)}`.
pub fn antisymmetrize(t: &Field) -> Field {
    let g = t.grid();
    let n = g.dim();
    let d = t.rank();
    let r = t.spinor_rank();
    let perms = permutations(d);
    let norm = 1.0 / factorial(d);
    let mut out = t.zeros_like().with_form_degree(d);
    for tflat in 0..t.n_tensor() {
        let idx = unflatten(tflat, n, d);
        for (perm, sign) in &perms {
            let permuted: Vec<usize> = perm.iter().map(|&p| idx[p]).collect();
            for s in 0..r {
                let src = t.comp_index(&permuted, s);
                let dst = t.comp_index(&idx, s);
                let coeff = sign * norm;
                let (src_plane, dst_plane) = (t.plane(src).to_vec(), out.plane_mut(dst));
                for (o, v) in dst_plane.iter_mut().zip(src_plane) {
                    *o += v * coeff;
                }
            }
        }
    }
    out
}

fn unflatten(mut flat: usize, n: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in (0..rank).rev() {
        idx[slot] = flat % n;
        flat /= n;
    }
    idx
}

fn permutations(d: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut all = Vec::new();
    rec(&mut Vec::new(), &mut (0..d).collect(), &mut all);
    all.into_iter()
        .map(|p| {
            let mut inversions = 0;
            for a in 0..d {
                for b in a + 1..d {
                    if p[a] > p[b] {
                        inversions += 1;
                    }
                }
            }
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign)
        })
        .collect()
}

fn check_form(w: &Field, what: &str) -> Result<()> {
    if w.form_degree() != w.rank() {
        return Err(Error::InvalidArgument(format!(
            "{what} expects a differential form (rank {} but form degree {})",
            w.rank(),
            w.form_degree()
        )));
    }
    Ok(())
}

/// Exterior derivative of a `j`-form, `j < n`.
pub fn exterior_d(w: &Field) -> Result<Field> {
    check_form(w, "exterior_d")?;
    let g = w.grid();
    let n = g.dim();
    let j = w.rank();
    if j >= n {
        return Err(Error::InvalidArgument(format!(
            "exterior_d of a {j}-form on a {n}-torus"
        )));
    }
    let r = w.spinor_rank();
    let partials = spectral_gradient(w);
    let mut out = Field::zeros(g, j + 1, r).with_form_degree(j + 1);
    for tflat in 0..out.n_tensor() {
        let idx = unflatten(tflat, n, j + 1);
        for s in 0..r {
            let dst = out.comp_index(&idx, s);
            for a in 0..=j {
                let mut rest = idx.clone();
                let axis = rest.remove(a);
                let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
                let src = w.comp_index(&rest, s);
                let src_plane = partials[axis].plane(src).to_vec();
                for (o, v) in out.plane_mut(dst).iter_mut().zip(src_plane) {
                    *o += v * sign;
                }
            }
        }
    }
    Ok(out)
}

/// Codifferential `(d* w)_J = - sum_i d_i w_{iJ}`, the adjoint of [`exterior_d`].
pub fn codifferential(w: &Field) -> Result<Field> {
    check_form(w, "codifferential")?;
    let j = w.rank();
    if j == 0 {
        return Err(Error::InvalidArgument("codifferential of a 0-form".into()));
    }
    let g = w.grid();
    let n = g.dim();
    let ns = g.n_sites();
    let inner = w.n_comps() / n;
    let spec = w.to_spectrum();
    let mut out_spec = vec![ZERO; inner * ns];
    for i in 0..n {
        let k = g.wavenumbers(i);
        for c in 0..inner {
            let src = &spec[(i * inner + c) * ns..(i * inner + c + 1) * ns];
            let dst = &mut out_spec[c * ns..(c + 1) * ns];
            for (s, (o, v)) in dst.iter_mut().zip(src).enumerate() {
                *o -= C64::new(0.0, k[s]) * v;
            }
        }
    }
    inverse_planes(g, &mut out_spec);
    Ok(Field::from_data(g, j - 1, w.spinor_rank(), out_spec)?.with_form_degree(j - 1))
}

/// Curvature `F_A = dA`, a purely imaginary 2-form.
pub fn curvature(a: &ConnectionForm) -> Result<Field> {
    Ok(exterior_d(a.field())?.imaginary_projection())
}

/// One covariant derivative `(nabla T)_{i,...} = d_i T_... + P(A_i T_...)`.
///
/// With `a = None` this is the flat Levi-Civita derivative on tensors. The
/// new index is prepended; trailing form indices are preserved.
pub fn nabla(a: Option<&ConnectionForm>, t: &Field, dealias: bool) -> Result<Field> {
    let g = t.grid();
    if let Some(a) = a {
        if a.grid() != g {
            return Err(Error::ShapeMismatch("connection and field grids differ".into()));
        }
    }
    let n = g.dim();
    let ns = g.n_sites();
    let cin = t.n_comps();
    let spec = t.to_spectrum();
    let mut out_spec = vec![ZERO; n * cin * ns];
    for i in 0..n {
        let k = g.wavenumbers(i);
        for c in 0..cin {
            let src = &spec[c * ns..(c + 1) * ns];
            let dst = &mut out_spec[(i * cin + c) * ns..(i * cin + c + 1) * ns];
            for (s, (o, v)) in dst.iter_mut().zip(src).enumerate() {
                *o = C64::new(0.0, k[s]) * v;
            }
        }
    }
    if let (Some(a), true) = (a, dealias) {
        let mut prod = vec![ZERO; n * cin * ns];
        for i in 0..n {
            let ai = a.plane(i);
            for c in 0..cin {
                let dst = &mut prod[(i * cin + c) * ns..(i * cin + c + 1) * ns];
                for ((o, x), y) in dst.iter_mut().zip(ai).zip(t.plane(c)) {
                    *o = x * y;
                }
            }
        }
        forward_planes(g, &mut prod);
        let mask = g.dealias_mask();
        for (chunk_o, chunk_p) in out_spec.chunks_mut(ns).zip(prod.chunks(ns)) {
            for (s, (o, p)) in chunk_o.iter_mut().zip(chunk_p).enumerate() {
                if mask[s] {
                    *o += p;
                }
            }
        }
    }
    inverse_planes(g, &mut out_spec);
    if let (Some(a), false) = (a, dealias) {
        for i in 0..n {
            let ai = a.plane(i);
            for c in 0..cin {
                let dst = &mut out_spec[(i * cin + c) * ns..(i * cin + c + 1) * ns];
                for ((o, x), y) in dst.iter_mut().zip(ai).zip(t.plane(c)) {
                    *o += x * y;
                }
            }
        }
    }
    Ok(Field::from_data(g, t.rank() + 1, t.spinor_rank(), out_spec)?
        .with_form_degree(t.form_degree()))
}

/// Exact discrete adjoint of [`nabla`]: contracts the leading index.
pub fn nabla_adjoint(a: Option<&ConnectionForm>, u: &Field, dealias: bool) -> Result<Field> {
    if u.rank() == 0 {
        return Err(Error::InvalidArgument("adjoint derivative of a rank-0 field".into()));
    }
    if u.form_degree() >= u.rank() {
        return Err(Error::InvalidArgument(
            "adjoint derivative would contract a form index".into(),
        ));
    }
    let g = u.grid();
    if let Some(a) = a {
        if a.grid() != g {
            return Err(Error::ShapeMismatch("connection and field grids differ".into()));
        }
    }
    let n = g.dim();
    let ns = g.n_sites();
    let cout = u.n_comps() / n;
    let spec = u.to_spectrum();
    let mut out_spec = vec![ZERO; cout * ns];
    for i in 0..n {
        let k = g.wavenumbers(i);
        for c in 0..cout {
            let src = &spec[(i * cout + c) * ns..(i * cout + c + 1) * ns];
            let dst = &mut out_spec[c * ns..(c + 1) * ns];
            for (s, (o, v)) in dst.iter_mut().zip(src).enumerate() {
                *o -= C64::new(0.0, k[s]) * v;
            }
        }
    }
    inverse_planes(g, &mut out_spec);
    if let Some(a) = a {
        let projected: Vec<C64> = if dealias {
            let mask = g.dealias_mask();
            let mut p = spec.clone();
            for chunk in p.chunks_mut(ns) {
                for (s, v) in chunk.iter_mut().enumerate() {
                    if !mask[s] {
                        *v = ZERO;
                    }
                }
            }
            inverse_planes(g, &mut p);
            p
        } else {
            u.data().to_vec()
        };
        for i in 0..n {
            let ai = a.plane(i);
            for c in 0..cout {
                let src = &projected[(i * cout + c) * ns..(i * cout + c + 1) * ns];
                let dst = &mut out_spec[c * ns..(c + 1) * ns];
                for ((o, x), y) in dst.iter_mut().zip(ai).zip(src) {
                    *o += x.conj() * y;
                }
            }
        }
    }
    Ok(Field::from_data(g, u.rank() - 1, u.spinor_rank(), out_spec)?
        .with_form_degree(u.form_degree()))
}

/// `nabla_A T` for a connection `A`.
pub fn cov_deriv(a: &ConnectionForm, t: &Field, dealias: bool) -> Result<Field> {
    nabla(Some(a), t, dealias)
}

/// `nabla_A^* T`.
pub fn cov_deriv_adjoint(a: &ConnectionForm, t: &Field, dealias: bool) -> Result<Field> {
    nabla_adjoint(Some(a), t, dealias)
}

/// `[T, nabla T, ..., nabla^{(m)} T]`.
pub fn nabla_tower(
    a: Option<&ConnectionForm>,
    t: &Field,
    m: usize,
    dealias: bool,
) -> Result<Vec<Field>> {
    let mut out = Vec::with_capacity(m + 1);
    out.push(t.clone());
    for _ in 0..m {
        let next = nabla(a, out.last().unwrap(), dealias)?;
        out.push(next);
    }
    Ok(out)
}

/// `nabla_A^{(m)} phi`; `m = 0` is the identity.
pub fn iterated_cov_deriv(
    a: &ConnectionForm,
    phi: &Field,
    m: usize,
    dealias: bool,
) -> Result<Field> {
    Ok(nabla_tower(Some(a), phi, m, dealias)?.pop().unwrap())
}

/// `m`-fold adjoint, `(nabla^*)^m`, lowering the rank by `m`.
pub fn iterated_adjoint(
    a: Option<&ConnectionForm>,
    t: &Field,
    m: usize,
    dealias: bool,
) -> Result<Field> {
    let mut cur = t.clone();
    for _ in 0..m {
        cur = nabla_adjoint(a, &cur, dealias)?;
    }
    Ok(cur)
}

/// Hodge Laplacian `dd* + d*d` on forms.
pub fn hodge_laplacian(w: &Field) -> Result<Field> {
    check_form(w, "hodge_laplacian")?;
    let n = w.grid().dim();
    let j = w.rank();
    let mut out = w.zeros_like();
    if j < n {
        out = &out + &codifferential(&exterior_d(w)?)?;
    }
    if j > 0 {
        out = &out + &exterior_d(&codifferential(w)?)?;
    }
    Ok(out)
}

/// Bochner (rough) Laplacian `nabla^* nabla` with the flat Levi-Civita connection.
pub fn bochner_laplacian(w: &Field) -> Result<Field> {
    nabla_adjoint(None, &nabla(None, w, false)?, false)
}

/// `L^p f` with `L = -sum_j d_j^2` the nonnegative Laplacian, applied componentwise.
pub fn laplacian_power(f: &Field, power: u32) -> Field {
    if power == 0 {
        return f.clone();
    }
    let ksq = f.grid().ksq().to_vec();
    f.spectral_multiply(move |s| C64::new(ksq[s].powi(power as i32), 0.0))
}

/// Gauge action `(A, phi) -> (A + i d theta, e^{-i theta} phi)` of `zeta = e^{i theta}`.
pub fn gauge_transform(
    g: &GaugePhase,
    a: &ConnectionForm,
    phi: &Field,
) -> Result<(ConnectionForm, Field)> {
    let dtheta = exterior_d(g.theta())?;
    let mut a_new = a.field().clone();
    a_new.axpy(I, &dtheta.real_projection());
    Ok((ConnectionForm::project(a_new)?, gauge_act(g, phi)))
}

/// Action on tensor-spinors: multiply the spinor factor by `e^{-i theta}`.
pub fn gauge_act(g: &GaugePhase, t: &Field) -> Field {
    t.mul_pointwise(&g.inverse_phase())
}

/// Coulomb projection: the phase `theta` (zero mean) with `d*(A + i d theta) = 0`.
///
/// Solves `L theta = -d* a` by Fourier division; the zero mode and any mode
/// with vanishing discrete symbol are left untouched, so the harmonic part of
/// `A` is retained.
pub fn coulomb_project(a: &ConnectionForm) -> Result<(ConnectionForm, GaugePhase)> {
    let g = a.grid();
    let div = codifferential(&a.real_form())?;
    let ksq = g.ksq().to_vec();
    let theta = div.spectral_multiply(move |s| {
        if ksq[s] > 0.0 {
            C64::new(-1.0 / ksq[s], 0.0)
        } else {
            ZERO
        }
    });
    let gauge = GaugePhase::new(theta)?;
    let dtheta = exterior_d(gauge.theta())?;
    let mut out = a.field().clone();
    out.axpy(I, &dtheta.real_projection());
    Ok((ConnectionForm::project(out)?, gauge))
}

/// Coulomb-gauge potential `A = d* L^{-1} F` of an exact imaginary 2-form,
/// so that `dA = F` once the harmonic (mean) part of `F` is removed.
pub fn coulomb_potential(f: &Field) -> Result<ConnectionForm> {
    check_form(f, "coulomb_potential")?;
    if f.rank() != 2 {
        return Err(Error::InvalidArgument("coulomb_potential expects a 2-form".into()));
    }
    let ksq = f.grid().ksq().to_vec();
    let inv = f.spectral_multiply(move |s| {
        if ksq[s] > 0.0 {
            C64::new(1.0 / ksq[s], 0.0)
        } else {
            ZERO
        }
    });
    ConnectionForm::project(codifferential(&inv)?)
}

/// `nabla_i nabla_j phi - nabla_j nabla_i phi - F_ij phi`, which vanishes on a flat torus.
pub fn commutator_defect(
    a: &ConnectionForm,
    phi: &Field,
    i: usize,
    j: usize,
    dealias: bool,
) -> Result<Field> {
    let n = phi.grid().dim();
    if i == j {
        return Err(Error::InvalidArgument("commutator needs distinct axes".into()));
    }
    if i >= n || j >= n {
        return Err(Error::InvalidArgument("axis out of range".into()));
    }
    if phi.rank() != 0 {
        return Err(Error::InvalidArgument("commutator_defect expects a spinor".into()));
    }
    let second = iterated_cov_deriv(a, phi, 2, dealias)?;
    let r = phi.spinor_rank();
    let f = curvature(a)?;
    let fij = Field::from_data(phi.grid(), 0, 1, f.plane(f.comp_index(&[i, j], 0)).to_vec())?;
    let mut fphi = phi.mul_pointwise(&fij);
    if dealias {
        fphi = fphi.dealiased();
    }
    let mut out = phi.zeros_like();
    for s in 0..r {
        let ij = second.plane(second.comp_index(&[i, j], s));
        let ji = second.plane(second.comp_index(&[j, i], s));
        let src = fphi.plane(s).to_vec();
        for (((o, x), y), z) in out.plane_mut(s).iter_mut().zip(ij).zip(ji).zip(src) {
            *o = x - y - z;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::norms::{l2_inner, l2_norm, sup_norm};
    use crate::random::{random_band_limited, random_connection, random_form, random_gauge};

    fn t2(n: usize) -> TorusGrid {
        TorusGrid::periodic(&[n, n]).unwrap()
    }

    fn a_sin(g: &TorusGrid) -> ConnectionForm {
        // A = i sin(x^1) dx^2
        ConnectionForm::project(Field::from_fn(g, 1, 1, |x, c| {
            if c == 1 {
                C64::new(0.0, x[0].sin())
            } else {
                ZERO
            }
        }))
        .unwrap()
    }

    fn close(a: &Field, b: &Field, tol: f64) -> bool {
        let d = a - b;
        sup_norm(&d) <= tol
    }

    #[test]
    fn d_of_constant_and_d_squared() {
        let g = t2(16);
        let c = Field::from_fn(&g, 0, 1, |_, _| C64::new(3.0, 1.0));
        assert!(sup_norm(&exterior_d(&c).unwrap()) < 1e-13);
        let theta = random_band_limited(&g, 0, 1, 4, 2, 1.0).unwrap();
        let dd = exterior_d(&exterior_d(&theta).unwrap()).unwrap();
        assert!(sup_norm(&dd) < 1e-12);
        let g3 = TorusGrid::periodic(&[8, 8, 8]).unwrap();
        let w = random_form(&g3, 1, 2, 5, 1.0).unwrap();
        let ddw = exterior_d(&exterior_d(&w).unwrap()).unwrap();
        assert!(sup_norm(&ddw) < 1e-12 * sup_norm(&w).max(1.0) * 10.0);
        let dsds = codifferential(&codifferential(&random_form(&g3, 3, 2, 1, 1.0).unwrap()).unwrap())
            .unwrap();
        assert!(sup_norm(&dsds) < 1e-11);
        // top-degree input is rejected
        assert!(exterior_d(&Field::zero_form(&g, 2)).is_err());
        assert!(codifferential(&Field::zeros(&g, 0, 1)).is_err());
    }

    #[test]
    fn curvature_of_sine_connection() {
        let g = t2(16);
        let f = curvature(&a_sin(&g)).unwrap();
        let expect = Field::from_fn(&g, 2, 1, |x, c| match c {
            1 => C64::new(0.0, x[0].cos()),
            2 => C64::new(0.0, -x[0].cos()),
            _ => ZERO,
        })
        .with_form_degree(2);
        assert!(close(&f, &expect, 1e-13));
        assert_eq!(f.max_abs_re(), 0.0);
        assert!(sup_norm(&curvature(&ConnectionForm::zeros(&g)).unwrap()) == 0.0);
    }

    #[test]
    fn pure_gauge_has_zero_curvature() {
        let g = t2(16);
        let th = random_gauge(&g, 3, 9, 1.0).unwrap();
        let (a, _) = gauge_transform(&th, &ConnectionForm::zeros(&g), &Field::zeros(&g, 0, 1))
            .unwrap();
        assert!(sup_norm(&curvature(&a).unwrap()) < 1e-12);
    }

    #[test]
    fn codifferential_of_exact_form() {
        let g = t2(16);
        let th = Field::from_fn(&g, 0, 1, |x, _| C64::new(x[0].cos(), 0.0));
        let lap = codifferential(&exterior_d(&th).unwrap()).unwrap();
        assert!(close(&lap, &th, 1e-12));
        let h = Field::from_fn(&g, 1, 1, |_, c| C64::new(c as f64 + 1.0, 0.0)).with_form_degree(1);
        assert!(sup_norm(&codifferential(&h).unwrap()) < 1e-13);
    }

    #[test]
    fn d_and_codifferential_are_adjoint() {
        for (sizes, deg) in [(vec![16, 16], 0), (vec![16, 16], 1), (vec![8, 8, 8], 1), (vec![8, 8, 8], 2)] {
            let g = TorusGrid::periodic(&sizes).unwrap();
            let alpha = if deg == 0 {
                random_band_limited(&g, 0, 1, 2, 11, 1.0).unwrap()
            } else {
                random_form(&g, deg, 2, 11, 1.0).unwrap()
            };
            let beta = random_form(&g, deg + 1, 2, 12, 1.0).unwrap();
            let lhs = l2_inner(&exterior_d(&alpha).unwrap(), &beta).unwrap();
            let rhs = l2_inner(&alpha, &codifferential(&beta).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-11 * lhs.norm().max(1.0), "{sizes:?} {deg}");
        }
    }

    #[test]
    fn cov_deriv_examples() {
        let g = t2(16);
        let a0 = ConnectionForm::zeros(&g);
        let c = C64::new(0.5, -2.0);
        let konst = Field::from_fn(&g, 0, 1, |_, _| c);
        assert!(sup_norm(&cov_deriv(&a0, &konst, true).unwrap()) < 1e-13);

        let e = Field::from_fn(&g, 0, 1, |x, _| c * C64::from_polar(1.0, x[0]));
        let de = cov_deriv(&a0, &e, false).unwrap();
        let expect = Field::from_fn(&g, 1, 1, |x, comp| {
            if comp == 0 {
                I * c * C64::from_polar(1.0, x[0])
            } else {
                ZERO
            }
        });
        assert!(close(&de, &expect, 1e-13));

        let dde = iterated_cov_deriv(&a0, &e, 2, false).unwrap();
        assert!((dde.get(5, 0) + e.get(5, 0)).norm() < 1e-12);
        for comp in 1..4 {
            assert!(dde.get(5, comp).norm() < 1e-12);
        }
        assert!(close(&iterated_cov_deriv(&a_sin(&g), &e, 0, true).unwrap(), &e, 0.0));
    }

    #[test]
    fn adjoint_examples() {
        let g = t2(16);
        let a0 = ConnectionForm::zeros(&g);
        let c = C64::new(1.0, 2.0);
        let t = Field::from_fn(&g, 1, 1, |x, comp| if comp == 0 { c * x[0].cos() } else { ZERO });
        let out = cov_deriv_adjoint(&a0, &t, true).unwrap();
        let expect = Field::from_fn(&g, 0, 1, |x, _| c * x[0].sin());
        assert!(close(&out, &expect, 1e-12));
        assert!(sup_norm(&cov_deriv_adjoint(&a0, &t.zeros_like(), true).unwrap()) == 0.0);
        assert!(cov_deriv_adjoint(&a0, &Field::zeros(&g, 0, 1), true).is_err());
    }

    #[test]
    fn cov_deriv_adjointness_on_random_pairs() {
        for dealias in [false, true] {
            let g = t2(16);
            let a = random_connection(&g, 3, 1, 0.7).unwrap();
            for rank in 0..3 {
                let s = random_band_limited(&g, rank, 2, 4, 2 + rank as u64, 1.0).unwrap();
                let t = random_band_limited(&g, rank + 1, 2, 4, 7 + rank as u64, 1.0).unwrap();
                let lhs = l2_inner(&cov_deriv(&a, &s, dealias).unwrap(), &t).unwrap();
                let rhs = l2_inner(&s, &cov_deriv_adjoint(&a, &t, dealias).unwrap()).unwrap();
                assert!((lhs - rhs).norm() <= 1e-11 * lhs.norm().max(1.0));
            }
            let phi = random_band_limited(&g, 0, 1, 4, 3, 1.0).unwrap();
            let big = random_band_limited(&g, 3, 1, 4, 4, 1.0).unwrap();
            let lhs = l2_inner(&iterated_cov_deriv(&a, &phi, 3, dealias).unwrap(), &big).unwrap();
            let rhs = l2_inner(&phi, &iterated_adjoint(Some(&a), &big, 3, dealias).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn laplacians_agree_on_flat_torus() {
        let g = t2(16);
        let w = Field::from_fn(&g, 1, 1, |x, c| if c == 1 { C64::new(x[0].cos(), 0.0) } else { ZERO })
            .with_form_degree(1);
        assert!(close(&hodge_laplacian(&w).unwrap(), &w, 1e-12));
        assert!(close(&bochner_laplacian(&w).unwrap(), &w, 1e-12));
        let konst = Field::from_fn(&g, 1, 1, |_, _| C64::new(1.0, 0.0)).with_form_degree(1);
        assert!(sup_norm(&hodge_laplacian(&konst).unwrap()) < 1e-13);
        assert!(sup_norm(&bochner_laplacian(&konst).unwrap()) < 1e-13);
        let g3 = TorusGrid::periodic(&[8, 8, 8]).unwrap();
        for deg in 0..=3 {
            let w = if deg == 0 {
                random_band_limited(&g3, 0, 1, 2, 3, 1.0).unwrap()
            } else {
                random_form(&g3, deg, 2, 3, 1.0).unwrap()
            };
            let h = hodge_laplacian(&w).unwrap();
            let b = bochner_laplacian(&w).unwrap();
            assert!(l2_norm(&(&h - &b)) <= 1e-11 * l2_norm(&h));
        }
    }

    #[test]
    fn gauge_transform_examples() {
        let g = t2(16);
        let a = random_connection(&g, 3, 4, 0.5).unwrap();
        let phi = random_band_limited(&g, 0, 2, 3, 5, 1.0).unwrap();
        let (a1, p1) = gauge_transform(&GaugePhase::zeros(&g), &a, &phi).unwrap();
        assert!(close(a1.field(), a.field(), 1e-15) && close(&p1, &phi, 0.0));

        let th = GaugePhase::new(Field::from_fn(&g, 0, 1, |_, _| C64::new(0.7, 0.0))).unwrap();
        let (a2, p2) = gauge_transform(&th, &a, &phi).unwrap();
        assert!(close(a2.field(), a.field(), 1e-14));
        assert!(close(&p2, &phi.scaled(C64::from_polar(1.0, -0.7)), 1e-15));

        let th = random_gauge(&g, 2, 6, 2.0).unwrap();
        let (a3, p3) = gauge_transform(&th, &a, &phi).unwrap();
        let n0 = phi.pointwise_norm_sq();
        let n1 = p3.pointwise_norm_sq();
        assert!(n0.iter().zip(&n1).all(|(x, y)| (x - y).abs() <= 1e-14 * x.max(1.0)));
        let f0 = curvature(&a).unwrap();
        let f1 = curvature(&a3).unwrap();
        assert!(close(&f0, &f1, 1e-11));
        assert_eq!(a3.max_abs_re(), 0.0);
    }

    #[test]
    fn gauge_covariance_of_cov_deriv() {
        let g = t2(32);
        for dealias in [false, true] {
            let (amp, kmax) = (0.3, 1);
            let a = random_connection(&g, kmax, 1, 0.5).unwrap();
            let phi = random_band_limited(&g, 0, 1, kmax, 2, 1.0).unwrap();
            let th = random_gauge(&g, 1, 3, amp).unwrap();
            let (a2, p2) = gauge_transform(&th, &a, &phi).unwrap();
            for m in 1..=4 {
                let lhs = iterated_cov_deriv(&a2, &p2, m, dealias).unwrap();
                let base = iterated_cov_deriv(&a, &phi, m, dealias).unwrap();
                let rhs = gauge_act(&th, &base);
                assert!(l2_norm(&(&lhs - &rhs)) <= 1e-8 * l2_norm(&base), "m = {m}");
            }
        }
    }

    #[test]
    fn coulomb_projection_examples() {
        let g = t2(16);
        // already Coulomb
        let a = a_sin(&g);
        let (ac, th) = coulomb_project(&a).unwrap();
        assert!(th.max_abs() < 1e-13);
        assert!(close(ac.field(), a.field(), 1e-13));

        // pure gauge plus a constant harmonic part
        let th0 = random_gauge(&g, 3, 2, 1.0).unwrap();
        let harmonic = ConnectionForm::project(Field::from_fn(&g, 1, 1, |_, c| {
            C64::new(0.0, 0.3 + c as f64)
        }))
        .unwrap();
        let (pure, _) = gauge_transform(&th0, &harmonic, &Field::zeros(&g, 0, 1)).unwrap();
        let (ac, _) = coulomb_project(&pure).unwrap();
        assert!(close(ac.field(), harmonic.field(), 1e-12));

        let a = random_connection(&g, 5, 3, 1.0).unwrap();
        let (ac, _) = coulomb_project(&a).unwrap();
        assert!(l2_norm(&codifferential(ac.field()).unwrap()) < 1e-10);
        assert!(close(&curvature(&ac).unwrap(), &curvature(&a).unwrap(), 1e-11));
    }

    #[test]
    fn potential_reproduces_exact_curvature() {
        let g = TorusGrid::periodic(&[16, 16]).unwrap();
        let a = random_connection(&g, 3, 8, 0.7).unwrap();
        let f = curvature(&a).unwrap();
        let b = coulomb_potential(&f).unwrap();
        assert!(sup_norm(&(&curvature(&b).unwrap() - &f)) < 1e-12);
        assert!(l2_norm(&codifferential(b.field()).unwrap()) < 1e-12);
    }

    #[test]
    fn commutator_equals_curvature() {
        let g = t2(32);
        let phi = random_band_limited(&g, 0, 1, 3, 1, 1.0).unwrap();
        assert!(sup_norm(&commutator_defect(&ConnectionForm::zeros(&g), &phi, 0, 1, true).unwrap()) < 1e-12);
        let d = commutator_defect(&a_sin(&g), &phi, 0, 1, true).unwrap();
        assert!(sup_norm(&d) < 1e-9);
        let th = random_gauge(&g, 2, 8, 1.0).unwrap();
        let (pure, _) = gauge_transform(&th, &ConnectionForm::zeros(&g), &phi).unwrap();
        let d = commutator_defect(&pure, &phi, 1, 0, true).unwrap();
        assert!(sup_norm(&d) < 1e-9);
        assert!(commutator_defect(&pure, &phi, 1, 1, true).is_err());
    }
}
