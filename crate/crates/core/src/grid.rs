//! Periodic lattice geometry on flat tori and the n-dimensional discrete
//! Fourier transform used by every spectral operator in the crate.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Highest supported base dimension.
pub const MAX_DIM: usize = 6;

/// Geometry of a flat torus `T^n = R^n / (L_1 Z x ... x L_n Z)` sampled on a
/// uniform grid with `N_j` points per axis.
///
/// Sites are stored row-major over the axes in declared order (the last axis
/// varies fastest). Cloning is cheap; FFT plans and wavenumber tables are shared.
#[derive(Clone)]
pub struct TorusGrid {
    inner: Arc<GridInner>,
}

struct GridInner {
    sizes: Vec<usize>,
    lengths: Vec<f64>,
    n_sites: usize,
    strides: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Signed integer mode number per axis, indexed by flat site index.
    modes: Vec<Vec<i64>>,
    /// Angular wavenumber `2 pi m / L` per axis with the Nyquist mode zeroed.
    wavenumbers: Vec<Vec<f64>>,
    /// `sum_j k_j^2` with the Nyquist-zeroed wavenumbers.
    ksq: Vec<f64>,
    /// 2/3-rule mask: true when `|m_j| <= N_j / 3` on every axis.
    dealias_keep: Vec<bool>,
}

/// Build a grid, checking that `n` agrees with the number of sizes and lengths.
pub fn make_grid(n: usize, sizes: &[usize], lengths: &[f64]) -> Result<TorusGrid> {
    if sizes.len() != n || lengths.len() != n {
        return Err(Error::InvalidGrid(format!(
            "dimension {n} does not match {} sizes and {} lengths",
            sizes.len(),
            lengths.len()
        )));
    }
    TorusGrid::new(sizes, lengths)
}

impl TorusGrid {
    pub fn new(sizes: &[usize], lengths: &[f64]) -> Result<Self> {
        let n = sizes.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must lie in 1..={MAX_DIM}, got {n}"
            )));
        }
        if lengths.len() != n {
            return Err(Error::InvalidGrid(format!(
                "{n} sizes but {} lengths",
                lengths.len()
            )));
        }
        for (axis, &size) in sizes.iter().enumerate() {
            if size < 4 || size % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: size {size} must be even and at least 4"
                )));
            }
        }
        for (axis, &len) in lengths.iter().enumerate() {
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: period {len} must be positive and finite"
                )));
            }
        }

        let n_sites: usize = sizes.iter().product();
        let mut strides = vec![1usize; n];
        for axis in (0..n.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * sizes[axis + 1];
        }

        let mut planner = FftPlanner::<f64>::new();
        let forward = sizes.iter().map(|&s| planner.plan_fft_forward(s)).collect();
        let inverse = sizes.iter().map(|&s| planner.plan_fft_inverse(s)).collect();

        let mut modes = vec![vec![0i64; n_sites]; n];
        let mut wavenumbers = vec![vec![0.0f64; n_sites]; n];
        let mut ksq = vec![0.0f64; n_sites];
        let mut dealias_keep = vec![true; n_sites];
        for site in 0..n_sites {
            let mut rem = site;
            for axis in 0..n {
                let idx = rem / strides[axis];
                rem %= strides[axis];
                let size = sizes[axis];
                let m = signed_mode(idx, size);
                modes[axis][site] = m;
                let k = if 2 * m.unsigned_abs() as usize == size {
                    0.0
                } else {
                    2.0 * PI * m as f64 / lengths[axis]
                };
                wavenumbers[axis][site] = k;
                ksq[site] += k * k;
                if 3 * m.unsigned_abs() as usize > size {
                    dealias_keep[site] = false;
                }
            }
        }

        Ok(Self {
            inner: Arc::new(GridInner {
                sizes: sizes.to_vec(),
                lengths: lengths.to_vec(),
                n_sites,
                strides,
                forward,
                inverse,
                modes,
                wavenumbers,
                ksq,
                dealias_keep,
            }),
        })
    }

    /// Grid with every period equal to `2 pi`.
    pub fn periodic(sizes: &[usize]) -> Result<Self> {
        Self::new(sizes, &vec![2.0 * PI; sizes.len()])
    }

    /// Same sample counts, different periods.
    pub fn with_lengths(&self, lengths: &[f64]) -> Result<Self> {
        Self::new(&self.inner.sizes, lengths)
    }

    pub fn dim(&self) -> usize {
        self.inner.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.inner.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.inner.lengths
    }

    pub fn n_sites(&self) -> usize {
        self.inner.n_sites
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.inner.lengths[axis] / self.inner.sizes[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.inner.lengths.iter().product()
    }

    /// Largest torus distance between two points.
    pub fn diameter(&self) -> f64 {
        self.inner
            .lengths
            .iter()
            .map(|l| 0.25 * l * l)
            .sum::<f64>()
            .sqrt()
    }

    pub fn multi_index(&self, site: usize) -> Vec<usize> {
        let mut rem = site;
        self.inner
            .strides
            .iter()
            .map(|&s| {
                let idx = rem / s;
                rem %= s;
                idx
            })
            .collect()
    }

    pub fn site_of(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.inner.strides)
            .zip(&self.inner.sizes)
            .map(|((&i, &s), &n)| (i % n) * s)
            .sum()
    }

    pub fn site_coords(&self, site: usize) -> Vec<f64> {
        self.multi_index(site)
            .iter()
            .enumerate()
            .map(|(axis, &i)| i as f64 * self.spacing(axis))
            .collect()
    }

    /// Minimum-image distance between two points of the torus.
    pub fn torus_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.inner.lengths)
            .map(|((a, b), l)| {
                let d = (a - b).rem_euclid(*l);
                let d = d.min(l - d);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Signed integer mode numbers along `axis`, indexed by flat spectral index.
    pub fn modes(&self, axis: usize) -> &[i64] {
        &self.inner.modes[axis]
    }

    /// Angular wavenumbers along `axis` (Nyquist zeroed), flat-indexed.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.wavenumbers[axis]
    }

    /// `|k|^2` per flat spectral index.
    pub fn ksq(&self) -> &[f64] {
        &self.inner.ksq
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.inner.dealias_keep
    }

    /// Largest `|k|^2` resolved by the grid.
    pub fn max_ksq(&self) -> f64 {
        self.inner.ksq.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest `max_j |m_j|` with `3 |m_j| <= N_j`, i.e. the band kept by the 2/3 rule.
    pub fn dealias_band(&self) -> usize {
        self.inner.sizes.iter().map(|&n| n / 3).min().unwrap_or(0)
    }

    /// Unnormalized forward transform of one plane of `n_sites` values.
    pub fn fft_forward(&self, plane: &mut [Complex64]) {
        self.transform(plane, false);
    }

    /// Inverse transform including the `1 / n_sites` normalization.
    pub fn fft_inverse(&self, plane: &mut [Complex64]) {
        self.transform(plane, true);
        let scale = 1.0 / self.inner.n_sites as f64;
        for v in plane.iter_mut() {
            *v *= scale;
        }
    }

    fn transform(&self, plane: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(plane.len(), self.inner.n_sites);
        let g = &*self.inner;
        let mut buf: Vec<Complex64> = Vec::new();
        let mut scratch: Vec<Complex64> = Vec::new();
        for axis in 0..g.sizes.len() {
            let fft = if inverse {
                &g.inverse[axis]
            } else {
                &g.forward[axis]
            };
            let size = g.sizes[axis];
            let inner = g.strides[axis];
            let block = size * inner;
            scratch.resize(fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
            if inner == 1 {
                fft.process_with_scratch(plane, &mut scratch);
                continue;
            }
            buf.resize(block, Complex64::new(0.0, 0.0));
            for chunk in plane.chunks_mut(block) {
                for j in 0..inner {
                    for m in 0..size {
                        buf[j * size + m] = chunk[m * inner + j];
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for j in 0..inner {
                    for m in 0..size {
                        chunk[m * inner + j] = buf[j * size + m];
                    }
                }
            }
        }
    }
}

fn signed_mode(idx: usize, size: usize) -> i64 {
    if idx <= size / 2 {
        idx as i64
    } else {
        idx as i64 - size as i64
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.sizes == other.inner.sizes && self.inner.lengths == other.inner.lengths)
    }
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("sizes", &self.inner.sizes)
            .field("lengths", &self.inner.lengths)
            .finish()
    }
}
