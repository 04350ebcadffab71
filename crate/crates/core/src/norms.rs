//! Inner products and global, local and weighted norms with cell quadrature.

use crate::error::{Error, Result};
use crate::field::{Field, C64, ZERO};
use crate::grid::TorusGrid;

/// Discrete `L^2` inner product, linear in the first slot and conjugate-linear
/// in the second.
pub fn l2_inner(f: &Field, g: &Field) -> Result<C64> {
    f.check_same_shape(g)?;
    let mut acc = ZERO;
    for (a, b) in f.data().iter().zip(g.data()) {
        acc += a * b.conj();
    }
    Ok(acc * (f.grid().cell_volume() * f.norm_weight()))
}

pub fn l2_norm_sq(f: &Field) -> f64 {
    f.data().iter().map(|v| v.norm_sqr()).sum::<f64>() * f.grid().cell_volume() * f.norm_weight()
}

pub fn l2_norm(f: &Field) -> f64 {
    l2_norm_sq(f).sqrt()
}

/// `(int |f|^p)^{1/p}` with `|f|` the pointwise tensor norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    let cell = f.grid().cell_volume();
    let sum: f64 = f
        .pointwise_norm_sq()
        .iter()
        .map(|n2| n2.powf(0.5 * p))
        .sum();
    Ok((sum * cell).powf(1.0 / p))
}

pub fn sup_norm(f: &Field) -> f64 {
    f.pointwise_norm_sq()
        .into_iter()
        .fold(0.0, f64::max)
        .sqrt()
}

/// Site index and value of the pointwise-norm maximum.
pub fn argmax_norm(f: &Field) -> (usize, f64) {
    let mut best = (0, 0.0);
    for (site, n2) in f.pointwise_norm_sq().into_iter().enumerate() {
        if n2 > best.1 {
            best = (site, n2);
        }
    }
    (best.0, best.1.sqrt())
}

/// `L^p` norm restricted to the closed torus ball `|x - center| <= radius`.
pub fn ball_lp_norm(f: &Field, center: &[f64], radius: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    let g = f.grid();
    if center.len() != g.dim() {
        return Err(Error::InvalidArgument(format!(
            "center has {} coordinates, grid dimension is {}",
            center.len(),
            g.dim()
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let n2 = f.pointwise_norm_sq();
    let mut sum = 0.0;
    let mut hits = 0usize;
    for (site, v) in n2.iter().enumerate() {
        if g.torus_distance(&g.site_coords(site), center) <= radius {
            sum += v.powf(0.5 * p);
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::EmptyBall { radius });
    }
    Ok((sum * g.cell_volume()).powf(1.0 / p))
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p must satisfy p >= 1, got {p}")))
    }
}

/// A cutoff `0 <= gamma <= 1` together with the weight exponent `s`; norms are
/// weighted by `gamma^{s/2}`.
#[derive(Clone, Debug)]
pub struct BumpWeight {
    gamma: Field,
    s: f64,
}

impl BumpWeight {
    pub fn new(gamma: Field, s: f64) -> Result<Self> {
        if gamma.rank() != 0 || gamma.spinor_rank() != 1 {
            return Err(Error::ShapeMismatch("bump weight must be a scalar field".into()));
        }
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("weight exponent must be positive, got {s}")));
        }
        if gamma
            .data()
            .iter()
            .any(|v| !(0.0..=1.0).contains(&v.re) || v.im != 0.0)
        {
            return Err(Error::InvalidArgument("bump values must be real and in [0, 1]".into()));
        }
        Ok(Self { gamma, s })
    }

    /// The constant weight `gamma = 1`.
    pub fn unit(grid: &TorusGrid, s: f64) -> Result<Self> {
        Self::new(
            Field::from_fn(grid, 0, 1, |_, _| C64::new(1.0, 0.0)),
            s,
        )
    }

    pub fn gamma(&self) -> &Field {
        &self.gamma
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `gamma^{s/2}` as a scalar field.
    pub fn weight(&self) -> Field {
        let mut w = self.gamma.clone();
        for v in w.data_mut() {
            *v = C64::new(v.re.powf(0.5 * self.s), 0.0);
        }
        w
    }
}

/// Smooth radial cutoff: 1 on the closed ball of radius `r_plateau`, 0 outside
/// `r_support`, with a `C^inf` monotone transition in between.
pub fn bump_function(
    grid: &TorusGrid,
    center: &[f64],
    r_plateau: f64,
    r_support: f64,
) -> Result<Field> {
    let half_min = grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    if !(0.0 < r_plateau && r_plateau < r_support && r_support < half_min) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < r_plateau ({r_plateau}) < r_support ({r_support}) < {half_min}"
        )));
    }
    if center.len() != grid.dim() {
        return Err(Error::InvalidArgument("center dimension mismatch".into()));
    }
    Ok(Field::from_fn(grid, 0, 1, |x, _| {
        let r = grid.torus_distance(x, center);
        let t = (r - r_plateau) / (r_support - r_plateau);
        C64::new((1.0 - smooth_step(t)).clamp(0.0, 1.0), 0.0)
    }))
}

fn smooth_step(t: f64) -> f64 {
    fn psi(t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (-1.0 / t).exp()
        }
    }
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        psi(t) / (psi(t) + psi(1.0 - t))
    }
}

/// `|| gamma^{s/2} f ||_{L^2}`.
pub fn weighted_l2_norm(f: &Field, w: &BumpWeight) -> Result<f64> {
    if w.gamma.grid() != f.grid() {
        return Err(Error::ShapeMismatch("weight and field live on different grids".into()));
    }
    Ok(l2_norm(&f.mul_pointwise(&w.weight())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::I;
    use std::f64::consts::PI;

    fn t2(n: usize) -> TorusGrid {
        TorusGrid::periodic(&[n, n]).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let g = t2(16);
        let c = C64::new(1.5, -0.5);
        let f = Field::from_fn(&g, 0, 1, |_, _| c);
        let z = f.zeros_like();
        assert_eq!(l2_inner(&z, &f).unwrap(), ZERO);
        let ff = l2_inner(&f, &f).unwrap();
        assert!(ff.im.abs() < 1e-14);
        assert!((ff.re - c.norm_sqr() * 4.0 * PI * PI).abs() < 1e-11);
        assert!((ff.re - l2_norm_sq(&f)).abs() < 1e-12);
        // conjugate-linear in the second slot
        let lhs = l2_inner(&f, &f.scaled(I)).unwrap();
        assert!((lhs - ff * (-I)).norm() < 1e-12);
        assert!(l2_inner(&f, &Field::zeros(&g, 1, 1)).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        let g = t2(16);
        assert_eq!(lp_norm(&Field::zeros(&g, 0, 1), 2.0).unwrap(), 0.0);
        let c = Field::from_fn(&g, 0, 1, |_, _| C64::new(0.0, 3.0));
        assert!((lp_norm(&c, 2.0).unwrap() - 3.0 * 2.0 * PI).abs() < 1e-12);
        let cos = Field::from_fn(&g, 0, 1, |x, _| C64::new(x[0].cos(), 0.0));
        assert!((lp_norm(&cos, 2.0).unwrap() - (2.0 * PI * PI).sqrt()).abs() < 1e-12);
        assert!(lp_norm(&cos, 0.5).is_err());
        assert!((sup_norm(&cos) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_form_norm_counts_each_pair_once() {
        let g = t2(8);
        let mut f = Field::zero_form(&g, 2);
        let (i01, i10) = (f.comp_index(&[0, 1], 0), f.comp_index(&[1, 0], 0));
        f.plane_mut(i01).fill(C64::new(2.0, 0.0));
        f.plane_mut(i10).fill(C64::new(-2.0, 0.0));
        assert!((sup_norm(&f) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ball_norm_full_cover_and_errors() {
        let g = t2(16);
        let f = Field::from_fn(&g, 0, 1, |x, _| C64::new(x[0].sin() + 0.3, x[1].cos()));
        let full = lp_norm(&f, 3.0).unwrap();
        let ball = ball_lp_norm(&f, &[1.0, 2.0], g.diameter(), 3.0).unwrap();
        assert!((full - ball).abs() < 1e-12 * full);
        assert_eq!(
            ball_lp_norm(&f.zeros_like(), &[0.0, 0.0], 1.0, 2.0).unwrap(),
            0.0
        );
        assert!(matches!(
            ball_lp_norm(&f, &[0.2, 0.2], 0.01, 2.0),
            Err(Error::EmptyBall { .. })
        ));
        assert!(ball_lp_norm(&f, &[0.0], 1.0, 2.0).is_err());
    }

    #[test]
    fn ball_norm_matches_direct_site_sum() {
        // brute-force oracle: enumerate the sites by hand on a 16^2 grid
        let g = t2(16);
        let h = 2.0 * PI / 16.0;
        let f = Field::from_fn(&g, 0, 1, |x, _| {
            let d2 = (x[0] - PI).powi(2) + (x[1] - PI).powi(2);
            C64::new((-d2).exp(), 0.0)
        });
        let r = 2.5 * h;
        let mut sum = 0.0;
        for i in 0..16 {
            for j in 0..16 {
                let (dx, dy) = (i as f64 * h - PI, j as f64 * h - PI);
                if (dx * dx + dy * dy).sqrt() <= r {
                    let v = (-(dx * dx + dy * dy)).exp();
                    sum += v * v;
                }
            }
        }
        let expect = (sum * h * h).sqrt();
        let got = ball_lp_norm(&f, &[PI, PI], r, 2.0).unwrap();
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn bump_function_profile() {
        let g = t2(32);
        let c = [PI, PI];
        let gam = bump_function(&g, &c, 0.5, 1.5).unwrap();
        let center = g.site_of(&[16, 16]);
        assert_eq!(gam.get(center, 0).re, 1.0);
        assert_eq!(gam.get(0, 0).re, 0.0);
        assert!(gam.data().iter().all(|v| (0.0..=1.0).contains(&v.re)));
        // integral between the volumes of the two discrete balls
        let cell = g.cell_volume();
        let integral: f64 = gam.data().iter().map(|v| v.re).sum::<f64>() * cell;
        let count = |r: f64| {
            (0..g.n_sites())
                .filter(|&s| g.torus_distance(&g.site_coords(s), &c) <= r)
                .count() as f64
                * cell
        };
        assert!(integral >= count(0.5) && integral <= count(1.5));
        assert!(bump_function(&g, &c, 1.5, 0.5).is_err());
        assert!(bump_function(&g, &c, 0.5, 4.0).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        let g = t2(16);
        let f = Field::from_fn(&g, 0, 2, |x, c| C64::new(x[0].sin(), c as f64));
        let unit = BumpWeight::unit(&g, 3.0).unwrap();
        assert!((weighted_l2_norm(&f, &unit).unwrap() - lp_norm(&f, 2.0).unwrap()).abs() < 1e-12);
        assert_eq!(weighted_l2_norm(&f.zeros_like(), &unit).unwrap(), 0.0);

        // gamma = 1/4, s = 2: weight gamma^{1} = 1/4, constant field c
        let quarter = BumpWeight::new(
            Field::from_fn(&g, 0, 1, |_, _| C64::new(0.25, 0.0)),
            2.0,
        )
        .unwrap();
        let c = C64::new(2.0, 1.0);
        let cf = Field::from_fn(&g, 0, 1, |_, _| c);
        let mut sum = 0.0;
        for _ in 0..g.n_sites() {
            sum += (0.25 * c).norm_sqr();
        }
        let expect = (sum * g.cell_volume()).sqrt();
        assert!((weighted_l2_norm(&cf, &quarter).unwrap() - expect).abs() < 1e-13);
        assert!(BumpWeight::new(Field::from_fn(&g, 0, 1, |_, _| C64::new(1.5, 0.0)), 1.0).is_err());
    }
}
