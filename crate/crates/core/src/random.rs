//! Seeded band-limited random initial data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffgeo::antisymmetrize;
use crate::error::{Error, Result};
use crate::field::{ConnectionForm, Field, GaugePhase, C64, ZERO};
use crate::grid::TorusGrid;
use crate::norms::l2_norm;

/// Random field with Fourier support in `|m_j| <= kmax` on every axis.
///
/// Coefficients are independent complex Gaussians drawn from a ChaCha8 stream
/// seeded by `seed`; the result is rescaled so its root-mean-square pointwise
/// norm equals `amplitude`. Identical arguments give bitwise-identical fields.
pub fn random_band_limited(
    grid: &TorusGrid,
    rank: usize,
    spinor_rank: usize,
    kmax: usize,
    seed: u64,
    amplitude: f64,
) -> Result<Field> {
    let min_size = *grid.sizes().iter().min().unwrap();
    if 3 * kmax >= min_size {
        return Err(Error::InvalidArgument(format!(
            "kmax = {kmax} must be below N/3 = {:.3}",
            min_size as f64 / 3.0
        )));
    }
    if spinor_rank == 0 {
        return Err(Error::InvalidArgument("spinor_rank must be at least 1".into()));
    }
    let mut out = Field::zeros(grid, rank, spinor_rank);
    if amplitude == 0.0 {
        return Ok(out);
    }
    let ns = grid.n_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![ZERO; out.n_comps() * ns];
    for plane in spec.chunks_mut(ns) {
        for (s, v) in plane.iter_mut().enumerate() {
            let inside = (0..grid.dim()).all(|a| grid.modes(a)[s].unsigned_abs() as usize <= kmax);
            if inside {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *v = C64::new(re, im);
            }
        }
    }
    out = out.with_spectrum(spec);
    let rms = l2_norm(&out) / grid.volume().sqrt();
    if rms > 0.0 {
        out.scale(C64::new(amplitude / rms, 0.0));
    }
    Ok(out)
}

/// Random unitary connection `A = i a` with band-limited real `a`.
pub fn random_connection(
    grid: &TorusGrid,
    kmax: usize,
    seed: u64,
    amplitude: f64,
) -> Result<ConnectionForm> {
    let f = random_band_limited(grid, 1, 1, kmax, seed, 1.0)?.real_projection();
    let rms = l2_norm(&f) / grid.volume().sqrt();
    let scale = if rms > 0.0 { amplitude / rms } else { 0.0 };
    ConnectionForm::from_real_form(&f.scaled(C64::new(scale, 0.0)))
}

/// Random band-limited scalar-valued differential form of the given degree.
pub fn random_form(
    grid: &TorusGrid,
    degree: usize,
    kmax: usize,
    seed: u64,
    amplitude: f64,
) -> Result<Field> {
    let t = random_band_limited(grid, degree, 1, kmax, seed, 1.0)?;
    let mut w = antisymmetrize(&t);
    let rms = l2_norm(&w) / grid.volume().sqrt();
    if rms > 0.0 {
        w.scale(C64::new(amplitude / rms, 0.0));
    }
    Ok(w)
}

/// Random band-limited gauge phase with root-mean-square `amplitude`.
pub fn random_gauge(grid: &TorusGrid, kmax: usize, seed: u64, amplitude: f64) -> Result<GaugePhase> {
    let f = random_band_limited(grid, 0, 1, kmax, seed, 1.0)?.real_projection();
    let rms = l2_norm(&f) / grid.volume().sqrt();
    let scale = if rms > 0.0 { amplitude / rms } else { 0.0 };
    GaugePhase::new(f.scaled(C64::new(scale, 0.0)))
}
