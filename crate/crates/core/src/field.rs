//! Field containers: complex tensor-spinor fields on a [`TorusGrid`], the
//! purely imaginary connection 1-form, and the real gauge phase.

use std::ops::{Add, Deref, Mul, Neg, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// A section of `(T*M)^{rank} (x) C^{spinor_rank}` sampled on the grid.
///
/// Values are stored component-major: component `c = t * spinor_rank + s`
/// (tensor multi-index `t` row-major, first index slowest) owns the contiguous
/// plane `data[c * n_sites .. (c + 1) * n_sites]`.
///
/// The last `form_degree` tensor indices are antisymmetric (a differential
/// form); the pointwise inner product then carries a `1 / form_degree!`
/// weight so that a 2-form has `|F|^2 = sum_{i<j} |F_ij|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    rank: usize,
    spinor_rank: usize,
    form_degree: usize,
    data: Vec<C64>,
}

/// Rank-0, one-component field.
pub type ScalarField = Field;
/// Rank-0 field with `spinor_rank >= 1` components.
pub type SpinorField = Field;
/// Rank-2 field with `form_degree = 2`.
pub type TwoForm = Field;

impl Field {
    pub fn zeros(grid: &TorusGrid, rank: usize, spinor_rank: usize) -> Self {
        assert!(spinor_rank >= 1, "spinor_rank must be at least 1");
        let n_comps = grid.dim().pow(rank as u32) * spinor_rank;
        Self {
            grid: grid.clone(),
            rank,
            spinor_rank,
            form_degree: 0,
            data: vec![ZERO; n_comps * grid.n_sites()],
        }
    }

    /// Zero differential form of the given degree with scalar values.
    pub fn zero_form(grid: &TorusGrid, degree: usize) -> Self {
        Self::zeros(grid, degree, 1).with_form_degree(degree)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            rank: self.rank,
            spinor_rank: self.spinor_rank,
            form_degree: self.form_degree,
            data: vec![ZERO; self.data.len()],
        }
    }

    /// Build from a closure `(coords, component) -> value`.
    pub fn from_fn<F>(grid: &TorusGrid, rank: usize, spinor_rank: usize, mut f: F) -> Self
    where
        F: FnMut(&[f64], usize) -> C64,
    {
        let mut out = Self::zeros(grid, rank, spinor_rank);
        let ns = grid.n_sites();
        for site in 0..ns {
            let x = grid.site_coords(site);
            for c in 0..out.n_comps() {
                out.data[c * ns + site] = f(&x, c);
            }
        }
        out
    }

    /// Wrap raw component-major data.
    pub fn from_data(
        grid: &TorusGrid,
        rank: usize,
        spinor_rank: usize,
        data: Vec<C64>,
    ) -> Result<Self> {
        let expected = grid.dim().pow(rank as u32) * spinor_rank.max(1) * grid.n_sites();
        if spinor_rank == 0 || data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} values for rank {rank}, spinor rank {spinor_rank}; got {}",
                data.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            rank,
            spinor_rank,
            form_degree: 0,
            data,
        })
    }

    /// Mark the trailing `degree` indices as an antisymmetric form.
    pub fn with_form_degree(mut self, degree: usize) -> Self {
        assert!(degree <= self.rank, "form degree exceeds tensor rank");
        self.form_degree = degree;
        self
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn spinor_rank(&self) -> usize {
        self.spinor_rank
    }

    pub fn form_degree(&self) -> usize {
        self.form_degree
    }

    pub fn n_tensor(&self) -> usize {
        self.grid.dim().pow(self.rank as u32)
    }

    pub fn n_comps(&self) -> usize {
        self.n_tensor() * self.spinor_rank
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn plane(&self, comp: usize) -> &[C64] {
        let ns = self.grid.n_sites();
        &self.data[comp * ns..(comp + 1) * ns]
    }

    pub fn plane_mut(&mut self, comp: usize) -> &mut [C64] {
        let ns = self.grid.n_sites();
        &mut self.data[comp * ns..(comp + 1) * ns]
    }

    /// Component index of tensor multi-index `tensor` and spinor slot `s`.
    pub fn comp_index(&self, tensor: &[usize], s: usize) -> usize {
        debug_assert_eq!(tensor.len(), self.rank);
        let n = self.grid.dim();
        let t = tensor.iter().fold(0, |acc, &i| acc * n + i);
        t * self.spinor_rank + s
    }

    pub fn get(&self, site: usize, comp: usize) -> C64 {
        self.data[comp * self.grid.n_sites() + site]
    }

    /// Weight applied to the plain tensor sum in inner products.
    pub fn norm_weight(&self) -> f64 {
        1.0 / factorial(self.form_degree)
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.grid == other.grid
            && self.rank == other.rank
            && self.spinor_rank == other.spinor_rank
            && self.form_degree == other.form_degree
    }

    pub fn check_same_shape(&self, other: &Field) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "(rank {}, spinor {}, form {}, {:?}) vs (rank {}, spinor {}, form {}, {:?})",
                self.rank,
                self.spinor_rank,
                self.form_degree,
                self.grid.sizes(),
                other.rank,
                other.spinor_rank,
                other.form_degree,
                other.grid.sizes()
            )))
        }
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: C64, x: &Field) {
        assert!(self.same_shape(x), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: C64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn scaled(&self, alpha: C64) -> Field {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// Pointwise squared norm at each site.
    pub fn pointwise_norm_sq(&self) -> Vec<f64> {
        let ns = self.grid.n_sites();
        let mut out = vec![0.0; ns];
        for plane in self.data.chunks(ns) {
            for (o, v) in out.iter_mut().zip(plane) {
                *o += v.norm_sqr();
            }
        }
        let w = self.norm_weight();
        if w != 1.0 {
            for o in &mut out {
                *o *= w;
            }
        }
        out
    }

    pub fn pointwise_norm(&self) -> Vec<f64> {
        self.pointwise_norm_sq().into_iter().map(f64::sqrt).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs_re(&self) -> f64 {
        self.data.iter().map(|v| v.re.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_im(&self) -> f64 {
        self.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Zero the real part of every value.
    pub fn imaginary_projection(mut self) -> Field {
        for v in &mut self.data {
            v.re = 0.0;
        }
        self
    }

    /// Zero the imaginary part of every value.
    pub fn real_projection(mut self) -> Field {
        for v in &mut self.data {
            v.im = 0.0;
        }
        self
    }

    /// Multiply every component pointwise by a scalar (rank 0, one component) field.
    pub fn mul_pointwise(&self, scalar: &Field) -> Field {
        assert!(
            scalar.rank == 0 && scalar.spinor_rank == 1 && scalar.grid == self.grid,
            "mul_pointwise expects a scalar field on the same grid"
        );
        let ns = self.grid.n_sites();
        let mut out = self.clone();
        for plane in out.data.chunks_mut(ns) {
            for (v, s) in plane.iter_mut().zip(&scalar.data) {
                *v *= s;
            }
        }
        out
    }

    /// Forward transform of every component (unnormalized).
    pub fn to_spectrum(&self) -> Vec<C64> {
        let mut spec = self.data.clone();
        forward_planes(&self.grid, &mut spec);
        spec
    }

    /// Field with the same shape as `self` whose spectrum is `spec`.
    pub fn with_spectrum(&self, mut spec: Vec<C64>) -> Field {
        inverse_planes(&self.grid, &mut spec);
        Field {
            grid: self.grid.clone(),
            rank: self.rank,
            spinor_rank: self.spinor_rank,
            form_degree: self.form_degree,
            data: spec,
        }
    }

    /// Apply a real multiplier per flat spectral index to every component.
    pub fn spectral_multiply(&self, symbol: impl Fn(usize) -> C64) -> Field {
        let ns = self.grid.n_sites();
        let mut spec = self.to_spectrum();
        for plane in spec.chunks_mut(ns) {
            for (s, v) in plane.iter_mut().enumerate() {
                *v *= symbol(s);
            }
        }
        self.with_spectrum(spec)
    }

    /// 2/3-rule spectral truncation.
    pub fn dealiased(&self) -> Field {
        let mask = self.grid.dealias_mask();
        self.spectral_multiply(|s| if mask[s] { C64::new(1.0, 0.0) } else { ZERO })
    }

    /// Keep only modes with `|m_j| <= kmax` on every axis.
    pub fn band_limited(&self, kmax: usize) -> Field {
        let g = self.grid.clone();
        self.spectral_multiply(|s| {
            if (0..g.dim()).all(|a| g.modes(a)[s].unsigned_abs() as usize <= kmax) {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        })
    }
}

pub(crate) fn forward_planes(grid: &TorusGrid, data: &mut [C64]) {
    data.par_chunks_mut(grid.n_sites())
        .for_each(|p| grid.fft_forward(p));
}

pub(crate) fn inverse_planes(grid: &TorusGrid, data: &mut [C64]) {
    data.par_chunks_mut(grid.n_sites())
        .for_each(|p| grid.fft_inverse(p));
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Spectral derivative along `axis`: exact for band-limited input, Nyquist mode zeroed.
pub fn spectral_partial(f: &Field, axis: usize) -> Result<Field> {
    let g = f.grid();
    if axis >= g.dim() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for dimension {}",
            g.dim()
        )));
    }
    let k = g.wavenumbers(axis);
    Ok(f.spectral_multiply(|s| C64::new(0.0, k[s])))
}

/// All partial derivatives of `f`, one forward transform per component.
pub fn spectral_gradient(f: &Field) -> Vec<Field> {
    let g = f.grid();
    let ns = g.n_sites();
    let spec = f.to_spectrum();
    (0..g.dim())
        .map(|axis| {
            let k = g.wavenumbers(axis);
            let mut d = spec.clone();
            for plane in d.chunks_mut(ns) {
                for (s, v) in plane.iter_mut().enumerate() {
                    *v *= C64::new(0.0, k[s]);
                }
            }
            f.with_spectrum(d)
        })
        .collect()
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Field> for &Field {
            type Output = Field;
            fn $method(self, rhs: &Field) -> Field {
                assert!(self.same_shape(rhs), "field shape mismatch");
                let mut out = self.clone();
                for (a, b) in out.data.iter_mut().zip(&rhs.data) {
                    *a = *a $op *b;
                }
                out
            }
        }
    };
}
binop!(Add, add, +);
binop!(Sub, sub, -);

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scaled(C64::new(rhs, 0.0))
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scaled(C64::new(-1.0, 0.0))
    }
}

/// A unitary connection `A = i a` on the line bundle: a purely imaginary 1-form.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionForm(Field);

impl ConnectionForm {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self(Field::zero_form(grid, 1))
    }

    /// Wrap a rank-1 scalar-valued field, discarding its real part.
    pub fn project(field: Field) -> Result<Self> {
        if field.rank() != 1 || field.spinor_rank() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "connection must be a rank-1 scalar form, got rank {} spinor {}",
                field.rank(),
                field.spinor_rank()
            )));
        }
        Ok(Self(field.with_form_degree(1).imaginary_projection()))
    }

    /// `A = i a` for a real 1-form `a` (only the real part of `a` is used).
    pub fn from_real_form(a: &Field) -> Result<Self> {
        let mut f = a.clone().real_projection();
        f.scale(I);
        Self::project(f)
    }

    pub fn field(&self) -> &Field {
        &self.0
    }

    pub fn into_field(self) -> Field {
        self.0
    }

    /// The real 1-form `a` with `A = i a`.
    pub fn real_form(&self) -> Field {
        let mut f = self.0.scaled(-I);
        for v in f.data_mut() {
            v.im = 0.0;
        }
        f
    }
}

impl Deref for ConnectionForm {
    type Target = Field;
    fn deref(&self) -> &Field {
        &self.0
    }
}

/// A gauge transformation `zeta = e^{i theta}`, stored through its real phase.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugePhase {
    theta: Field,
}

impl GaugePhase {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            theta: Field::zeros(grid, 0, 1),
        }
    }

    /// Wrap a scalar field; the imaginary part is discarded.
    pub fn new(theta: Field) -> Result<Self> {
        if theta.rank() != 0 || theta.spinor_rank() != 1 {
            return Err(Error::ShapeMismatch(
                "gauge phase must be a scalar field".into(),
            ));
        }
        Ok(Self {
            theta: theta.real_projection(),
        })
    }

    pub fn theta(&self) -> &Field {
        &self.theta
    }

    /// The scalar field `e^{-i theta}`, i.e. the action `zeta^{-1}` on spinors.
    pub fn inverse_phase(&self) -> Field {
        let mut out = self.theta.clone();
        for v in out.data_mut() {
            *v = C64::from_polar(1.0, -v.re);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.theta.max_abs_re()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn layout_and_comp_index() {
        let g = TorusGrid::periodic(&[4, 4, 4]).unwrap();
        let f = Field::zeros(&g, 2, 3);
        assert_eq!(f.n_comps(), 27);
        assert_eq!(f.data().len(), 27 * 64);
        assert_eq!(f.comp_index(&[0, 0], 0), 0);
        assert_eq!(f.comp_index(&[1, 2], 1), (3 + 2) * 3 + 1);
    }

    #[test]
    fn spectral_partial_examples() {
        let g = TorusGrid::periodic(&[16, 16]).unwrap();
        let c = Field::from_fn(&g, 0, 1, |_, _| C64::new(2.5, -1.0));
        assert!(spectral_partial(&c, 0).unwrap().data().iter().all(|v| v.norm() < 1e-13));

        let e = Field::from_fn(&g, 0, 1, |x, _| C64::from_polar(1.0, x[0]));
        let de = spectral_partial(&e, 0).unwrap();
        let expect = e.scaled(I);
        assert!((&de - &expect).data().iter().all(|v| v.norm() < 1e-13));

        let s = Field::from_fn(&g, 0, 1, |x, _| C64::new(x[0].sin(), 0.0));
        let ds = spectral_partial(&s, 0).unwrap();
        let cos = Field::from_fn(&g, 0, 1, |x, _| C64::new(x[0].cos(), 0.0));
        assert!((&ds - &cos).data().iter().all(|v| v.norm() < 1e-13));

        assert!(spectral_partial(&s, 2).is_err());
    }

    #[test]
    fn nyquist_mode_has_zero_derivative() {
        let g = TorusGrid::periodic(&[8]).unwrap();
        let f = Field::from_fn(&g, 0, 1, |x, _| C64::new((4.0 * x[0]).cos(), 0.0));
        let df = spectral_partial(&f, 0).unwrap();
        assert!(df.data().iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn connection_is_purely_imaginary() {
        let g = TorusGrid::periodic(&[8, 8]).unwrap();
        let f = Field::from_fn(&g, 1, 1, |x, c| C64::new(x[0] + c as f64, x[1]));
        let a = ConnectionForm::project(f).unwrap();
        assert_eq!(a.max_abs_re(), 0.0);
        let real = a.real_form();
        assert_eq!(real.max_abs_im(), 0.0);
        assert!(ConnectionForm::project(Field::zeros(&g, 0, 1)).is_err());
    }

    #[test]
    fn inverse_phase_has_unit_modulus() {
        let g = TorusGrid::periodic(&[8, 8]).unwrap();
        let th = Field::from_fn(&g, 0, 1, |x, _| C64::new(3.0 * x[0].sin() + PI, 0.0));
        let phase = GaugePhase::new(th).unwrap().inverse_phase();
        assert!(phase.data().iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
    }
}
