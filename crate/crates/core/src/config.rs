//! Run configuration shared by the library driver and the command line.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::diffgeo::coulomb_project;
use crate::error::{Error, Result};
use crate::field::C64;
use crate::functional::SwParams;
use crate::grid::TorusGrid;
use crate::norms::sup_norm;
use crate::random::{random_band_limited, random_connection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub sizes: Vec<usize>,
    /// Periods per axis; `2 pi` each when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn build(&self) -> Result<TorusGrid> {
        let lengths = match &self.lengths {
            Some(l) => l.clone(),
            None => vec![TAU; self.sizes.len()],
        };
        crate::grid::make_grid(self.n, &self.sizes, &lengths)
    }
}

fn one() -> usize {
    1
}

/// Seeded random initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub seed: u64,
    pub kmax: usize,
    pub phi_amplitude: f64,
    pub a_amplitude: f64,
    #[serde(default = "one")]
    pub spinor_rank: usize,
    /// Rescale the spinor so that `sup |phi|` equals this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_sup: Option<f64>,
    /// Start from the Coulomb representative of the random connection.
    #[serde(default)]
    pub coulomb: bool,
}

fn default_snapshot_every() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Retain a full state every this many steps.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Record diagnostics every this many steps.
    #[serde(default = "one")]
    pub report_every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { snapshot_every: default_snapshot_every(), report_every: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Classical RK4 on the gradient flow itself.
    Rk4Direct,
    /// Integrating-factor RK4 on the gauge-fixed parabolic system.
    ImexDeturck,
}

pub const DEFAULT_BLOWUP_CEILING: f64 = 1e6;

fn default_ceiling() -> f64 {
    DEFAULT_BLOWUP_CEILING
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub grid: GridSpec,
    pub k: usize,
    pub s0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    #[serde(default = "yes")]
    pub dealias: bool,
    pub init: InitSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default = "default_ceiling")]
    pub blowup_ceiling: f64,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive and finite, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be nonnegative and finite, got {}", self.t_end));
        }
        if !self.s0.is_finite() {
            return bad("s0 must be finite".into());
        }
        if self.output.snapshot_every == 0 || self.output.report_every == 0 {
            return bad("output cadences must be at least 1".into());
        }
        if !(self.blowup_ceiling > 0.0) {
            return bad("blowup_ceiling must be positive".into());
        }
        if self.init.spinor_rank == 0 {
            return bad("init.spinor_rank must be at least 1".into());
        }
        for (name, v) in [("init.phi_amplitude", self.init.phi_amplitude), ("init.a_amplitude", self.init.a_amplitude)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        let grid = self.grid.build()?;
        if 3 * self.init.kmax >= *grid.sizes().iter().min().unwrap() {
            return bad(format!("init.kmax = {} is not below N/3", self.init.kmax));
        }
        Ok(())
    }

    pub fn params(&self) -> SwParams {
        SwParams::new(self.k, self.s0).with_dealias(self.dealias)
    }

    /// Initial `(phi, A)` described by `init`.
    pub fn initial_state(&self) -> Result<crate::flow::FlowState> {
        let grid = self.grid.build()?;
        let init = &self.init;
        let mut phi =
            random_band_limited(&grid, 0, init.spinor_rank, init.kmax, init.seed, init.phi_amplitude)?;
        if let Some(target) = init.phi_sup {
            let sup = sup_norm(&phi);
            if sup > 0.0 {
                phi.scale(C64::new(target / sup, 0.0));
            }
        }
        let mut a = random_connection(&grid, init.kmax, init.seed.wrapping_add(1), init.a_amplitude)?;
        if init.coulomb {
            a = coulomb_project(&a)?.0;
        }
        Ok(crate::flow::FlowState::new(phi, a))
    }
}
